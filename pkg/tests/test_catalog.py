import json
import os
import tempfile
import unittest
from dataclasses import replace

import test_init

from scalebridge.catalog import (
    builtin_catalog,
    catalog_listing,
    export_catalog,
    is_homogeneous,
    catalog_environment,
    load_catalog_file,
    parse_catalog,
    relation_symbols,
    report_to_dict,
    report_to_json,
    report_to_table,
    run_catalog,
)
from scalebridge.dimensions import Dimension, Quantity
from scalebridge.errors import ConfigError, UnknownSymbol
from scalebridge.registry import ConstantRegistry, build_registry, default_registry, make_quantity

ROW_KEYS = {'name', 'paper_tag', 'lhs', 'rhs', 'log10_ratio', 'tol_decades', 'pass', 'definitional'}


class TestBuiltinCatalog(unittest.TestCase):
    """Pruebas para el catálogo incorporado."""

    def test_size_and_names(self):
        """Prueba el tamaño del catálogo y la unicidad de los nombres."""
        entries = builtin_catalog()
        self.assertEqual(len(entries), 13)
        names = [entry.name for entry in entries]
        self.assertEqual(len(set(names)), 13)
        self.assertIn('R5_planck', names)
        self.assertIn('R5_pion', names)
        self.assertTrue(all(entry.paper_tag for entry in entries))

    def test_homogeneity(self):
        """Prueba que todas las filas son dimensionalmente homogéneas."""
        env = catalog_environment(default_registry())
        for entry in builtin_catalog():
            with self.subTest(name=entry.name):
                self.assertTrue(is_homogeneous(entry, env))

    def test_export_round_trip(self):
        """Prueba que exportar, leer y volver a exportar es idéntico byte a byte."""
        entries = builtin_catalog()
        text = export_catalog(entries)
        parsed = parse_catalog(text)
        self.assertEqual([entry.relation for entry in parsed], [entry.relation for entry in entries])
        self.assertEqual(export_catalog(parsed), text)

    def test_load_catalog_file(self):
        """Prueba la lectura de un fichero de catálogo."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, 'catalog.txt')
            with open(path, 'w', encoding='utf-8') as f:
                f.write('# custom\n\n@name(C1) @tol(decades=1.0) hbar/(m_pi*c) ~ 1e-13*cm\n')
            entries = load_catalog_file(path)
            self.assertEqual([entry.name for entry in entries], ['C1'])
            report = run_catalog(entries)
            self.assertTrue(report.overall_pass)
            with self.assertRaises(ConfigError):
                load_catalog_file(os.path.join(temp_dir, 'missing.txt'))

    def test_listing(self):
        """Prueba las filas del listado."""
        rows = catalog_listing(builtin_catalog())
        self.assertEqual(len(rows), 13)
        self.assertEqual(rows[0]['name'], 'R1')
        self.assertEqual(rows[0]['tol_decades'], 0.5)
        self.assertTrue(rows[0]['relation'].startswith('@name(R1)'))


class TestRunCatalog(unittest.TestCase):
    """Pruebas para la evaluación del catálogo."""

    def setUp(self):
        self.entries = builtin_catalog()
        self.report = run_catalog(self.entries, default_registry())
        self.rows = {row.name: row for row in self.report.rows}

    def test_default_registry_passes(self):
        """Prueba que el catálogo pasa con el registro por defecto."""
        self.assertTrue(self.report.overall_pass)
        self.assertEqual(self.report.live_failures, [])

    def test_log_ratios(self):
        """Prueba los cocientes esperados de cada fila."""
        for entry in self.entries:
            with self.subTest(name=entry.name):
                row = self.rows[entry.name]
                self.assertAlmostEqual(row.verdict.log10_ratio, entry.expected_log10_ratio, delta=2e-3)
                self.assertTrue(row.verdict.dimensions_match)
        self.assertAlmostEqual(self.rows['R2'].lhs.magnitude, 136.97, delta=0.05)
        self.assertLessEqual(abs(self.rows['R12'].verdict.log10_ratio), 1e-9)
        self.assertLessEqual(abs(self.rows['R1'].verdict.log10_ratio), 0.05)

    def test_definitional_rows(self):
        """Prueba qué filas son definicionales."""
        definitional = {row.name for row in self.report.rows if row.definitional}
        self.assertEqual(definitional, {'R8', 'R9', 'R11'})

        registry = build_registry([('N', make_quantity(1e80, ''))])
        rows = {row.name: row for row in run_catalog(self.entries, registry).rows}
        self.assertFalse(rows['R8'].definitional)
        self.assertTrue(rows['R9'].definitional)

    def test_definitional_descriptions(self):
        """Prueba que cada fila con @defines lo dice en su descripción."""
        defining = {entry.name: entry for entry in self.entries if entry.relation.defines}
        self.assertEqual(set(defining), {'R8', 'R9', 'R11'})
        for name, entry in defining.items():
            with self.subTest(name=name):
                self.assertIn(f"defines {entry.relation.defines} under the default registry", entry.description)

    def test_gravity_override_fails(self):
        """Prueba que multiplicar G por 100 desplaza R2 y R3 dos décadas."""
        registry = build_registry([('G', make_quantity(6.674e-6, 'cm^3*g^-1*s^-2'))])
        report = run_catalog(self.entries, registry)
        rows = {row.name: row for row in report.rows}
        for name in ('R2', 'R3'):
            with self.subTest(name=name):
                shift = rows[name].verdict.log10_ratio - self.rows[name].verdict.log10_ratio
                self.assertAlmostEqual(shift, 2.0, places=9)
                self.assertFalse(rows[name].passed)
        self.assertFalse(report.overall_pass)

    def test_hubble_override(self):
        """Prueba la sensibilidad de R7 a la constante de Hubble."""
        larger = build_registry([('H', make_quantity(2.27e-16, 's^-1'))])
        row = {r.name: r for r in run_catalog(self.entries, larger).rows}['R7']
        self.assertAlmostEqual(row.verdict.log10_ratio, -0.305, delta=2e-3)
        self.assertTrue(row.passed)

        smaller = build_registry([('H', make_quantity(2.27e-20, 's^-1'))])
        row = {r.name: r for r in run_catalog(self.entries, smaller).rows}['R7']
        self.assertAlmostEqual(row.verdict.log10_ratio, 1.029, delta=2e-3)
        self.assertFalse(row.passed)

    def test_dimension_mutation_flips_rows(self):
        """Prueba que cambiar la dimensión de una constante rompe sus filas."""
        registry = default_registry()
        entries = [
            replace(registry.entry(symbol), quantity=Quantity(registry[symbol].magnitude, Dimension.of(L=1)))
            if symbol == 'm_pi' else registry.entry(symbol)
            for symbol in registry
        ]
        mutated = ConstantRegistry(entries)
        report = run_catalog(self.entries, mutated)
        for entry, row in zip(self.entries, report.rows):
            with self.subTest(name=entry.name):
                uses_pion = 'm_pi' in relation_symbols(entry.relation)
                self.assertEqual(row.verdict.dimensions_match, not uses_pion)
        self.assertFalse(report.overall_pass)

    def test_tolerance_override(self):
        """Prueba la tolerancia global."""
        report = run_catalog(self.entries, default_registry(), tol_override=0.1)
        failing = {row.name for row in report.live_failures}
        self.assertEqual(failing, {'R2', 'R3', 'R5_pion', 'R6', 'R7', 'R10'})

    def test_workers_do_not_change_report(self):
        """Prueba que la evaluación en paralelo da el mismo informe."""
        parallel = run_catalog(self.entries, default_registry(), workers=4)
        self.assertEqual(report_to_json(parallel), report_to_json(self.report))

    def test_unknown_symbol(self):
        """Prueba que un símbolo desconocido indica la entrada."""
        entries = parse_catalog('@name(X1) Q ~ 1\n')
        with self.assertRaises(UnknownSymbol) as ctx:
            run_catalog(entries)
        self.assertIn('X1', str(ctx.exception))


class TestReportSerialization(unittest.TestCase):
    """Pruebas para la serialización del informe."""

    def setUp(self):
        self.report = run_catalog(builtin_catalog())

    def test_json_fields(self):
        """Prueba los campos del informe JSON."""
        data = json.loads(report_to_json(self.report))
        self.assertEqual(set(data), {'registry_fingerprint', 'overall_pass', 'rows'})
        self.assertTrue(data['overall_pass'])
        for row in data['rows']:
            with self.subTest(name=row['name']):
                self.assertEqual(set(row), ROW_KEYS)
                self.assertEqual(set(row['lhs']), {'value', 'dimension'})

    def test_quantities_round_trip(self):
        """Prueba que las magnitudes del informe se reproducen bit a bit."""
        data = report_to_dict(self.report)
        for row, serialized in zip(self.report.rows, data['rows']):
            with self.subTest(name=row.name):
                for side, quantity in (('lhs', row.lhs), ('rhs', row.rhs)):
                    self.assertEqual(float(serialized[side]['value']), quantity.magnitude)
                    self.assertEqual(serialized[side]['dimension'], str(quantity.dimension))

    def test_table(self):
        """Prueba la tabla de texto."""
        table = report_to_table(self.report)
        self.assertIn('R10', table)
        self.assertIn('definitional', table)
        self.assertIn('overall: PASS', table)
        for row in self.report.rows:
            with self.subTest(name=row.name):
                self.assertIn(f"{row.lhs.magnitude:.8e}", table)
                self.assertIn(f"{row.rhs.magnitude:.8e}", table)


if __name__ == '__main__':
    unittest.main()
