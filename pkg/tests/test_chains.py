import json
import math
import unittest

import test_init

from scalebridge.chains import CHAINS, chain_to_json, chain_to_table, fluctuation_energy, run_chain
from scalebridge.dimensions import Dimension
from scalebridge.errors import ConfigError
from scalebridge.registry import build_registry, default_registry, make_quantity

ACTION = Dimension.of(M=1, L=2, T=-1)


class TestChains(unittest.TestCase):
    """Pruebas para las cadenas de derivación."""

    def setUp(self):
        self.registry = default_registry()

    def test_weinberg(self):
        """Prueba la cadena de la masa de Weinberg."""
        report = run_chain('weinberg', self.registry)
        self.assertTrue(report.passed)
        mass = report.value('m_weinberg')
        self.assertEqual(mass.dimension, Dimension.of(M=1))
        self.assertAlmostEqual(mass.magnitude / 1.0805e-25, 1.0, delta=1e-3)
        gaps = {step.symbol: step.gap_decades for step in report.steps}
        self.assertAlmostEqual(gaps['m_weinberg'], -0.362, delta=2e-3)
        self.assertAlmostEqual(gaps['L_weinberg'], -0.180, delta=2e-3)
        self.assertAlmostEqual(gaps['L_pion'], -1.267, delta=2e-3)

    def test_length_at_weinberg_mass(self):
        """Prueba que la longitud a la masa de Weinberg es c/2H."""
        report = run_chain('weinberg', self.registry)
        expected = self.registry['c'].magnitude / (2 * self.registry['H'].magnitude)
        self.assertAlmostEqual(report.value('L_weinberg').magnitude / expected, 1.0, delta=1e-9)

    def test_planck_constant(self):
        """Prueba la cadena de la constante de Planck."""
        report = run_chain('planck_constant', self.registry)
        self.assertTrue(report.passed)
        derived = report.value('hbar_derived')
        self.assertEqual(derived.dimension, ACTION)
        self.assertAlmostEqual(derived.magnitude / 9.747e-27, 1.0, delta=1e-3)
        final = report.steps[-1]
        self.assertEqual(final.symbol, 'dE_T')
        self.assertAlmostEqual(final.gap_decades, 0.966, delta=2e-3)
        self.assertAlmostEqual(report.value('N').magnitude / 5.0025e81, 1.0, delta=1e-3)

    def test_planck_particle(self):
        """Prueba la cadena de la partícula de Planck."""
        report = run_chain('planck_particle', self.registry)
        self.assertTrue(report.passed)
        length = report.value('L_planck')
        self.assertAlmostEqual(math.log10(length.magnitude) + 33, -0.092, delta=2e-3)
        self.assertAlmostEqual(report.value('E_ratio').magnitude, 1.9982, delta=2e-4)

    def test_planck_particle_factor_two(self):
        """Prueba el factor 2 exacto con la masa de Planck √(ħc/G)."""
        r = self.registry
        planck_mass = math.sqrt(r['hbar'].magnitude * r['c'].magnitude / r['G'].magnitude)
        registry = build_registry([('m_P', make_quantity(planck_mass, 'g'))])
        ratio = run_chain('planck_particle', registry).value('E_ratio')
        self.assertTrue(ratio.dimension.is_dimensionless)
        self.assertAlmostEqual(ratio.magnitude, 2.0, delta=1e-6)

    def test_unknown_chain(self):
        """Prueba que una cadena desconocida es un error de configuración."""
        with self.assertRaises(ConfigError):
            run_chain('nosuch', self.registry)

    def test_fluctuation_energy(self):
        """Prueba la función fluctuation_energy."""
        energy, action = fluctuation_energy(self.registry)
        self.assertEqual(energy.dimension, Dimension.of(M=1, L=2, T=-2))
        self.assertAlmostEqual(energy.magnitude / 2.922e-44, 1.0, delta=1e-3)
        self.assertEqual(action.dimension, ACTION)
        self.assertAlmostEqual(action.magnitude / 9.747e-27, 1.0, delta=1e-3)

    def test_fluctuation_energy_independent_of_radius(self):
        """Prueba que ΔE no depende de R y ΔE·T crece con R."""
        energy, action = fluctuation_energy(self.registry)
        other_energy, other_action = fluctuation_energy(build_registry([('R', make_quantity(3e27, 'cm'))]))
        self.assertAlmostEqual(other_energy.magnitude / energy.magnitude, 1.0, delta=1e-12)
        self.assertAlmostEqual(other_action.magnitude / action.magnitude, 0.3, delta=1e-12)

    def test_fluctuation_energy_with_fixed_count(self):
        """Prueba que con N fijo, doblar R divide ΔE entre dos y conserva ΔE·T."""
        count = ('N', make_quantity(5e81, ''))
        energy, action = fluctuation_energy(build_registry([count, ('R', make_quantity(1e28, 'cm'))]))
        doubled_energy, doubled_action = fluctuation_energy(
            build_registry([count, ('R', make_quantity(2e28, 'cm'))]))
        self.assertAlmostEqual(doubled_energy.magnitude / energy.magnitude, 0.5, delta=1e-12)
        self.assertAlmostEqual(doubled_action.magnitude / action.magnitude, 1.0, delta=1e-12)
        self.assertEqual(doubled_action.dimension, ACTION)

    def test_serialization(self):
        """Prueba las salidas JSON y de tabla."""
        for name in CHAINS:
            with self.subTest(name=name):
                report = run_chain(name, self.registry)
                data = json.loads(chain_to_json(report))
                self.assertEqual(data['chain'], name)
                self.assertEqual(len(data['steps']), len(report.steps))
                self.assertTrue(data['pass'])
                self.assertIn(f"chain: {name}", chain_to_table(report))


if __name__ == '__main__':
    unittest.main()
