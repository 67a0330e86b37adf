import math
import unittest

import test_init

from scalebridge.catalog import catalog_environment
from scalebridge.dimensions import Dimension, Quantity
from scalebridge.errors import ExpressionSyntaxError, NotIsolatable, UnknownSymbol
from scalebridge.expressions import format_expr, parse_expression
from scalebridge.registry import default_registry
from scalebridge.relations import (
    DEFAULT_TOL_DECADES,
    RelationOperator,
    check_relation,
    format_relation,
    isolate,
    parse_relation,
    relation_environment,
    solve_for,
)


class TestParseRelation(unittest.TestCase):
    """Pruebas para la lectura de relaciones."""

    def test_annotations(self):
        """Prueba la lectura de todas las anotaciones."""
        rel = parse_relation('@name(R5_planck) @paper(self-gravitating-length) @tol(decades=0.5) '
                             '@let(m=m_P, L_ref=1e-33*cm) hbar^2/(2*m^3*G) ~ L_ref')
        self.assertEqual(rel.name, 'R5_planck')
        self.assertEqual(rel.paper_tag, 'self-gravitating-length')
        self.assertEqual(rel.tol_decades, 0.5)
        self.assertEqual([symbol for symbol, _ in rel.bindings], ['m', 'L_ref'])
        self.assertIs(rel.operator, RelationOperator.ORDER)

    def test_defaults(self):
        """Prueba la tolerancia por defecto y la igualdad exacta."""
        self.assertEqual(parse_relation('a ~ b').tol_decades, DEFAULT_TOL_DECADES)
        exact = parse_relation('a = b')
        self.assertIs(exact.operator, RelationOperator.EXACT)
        self.assertAlmostEqual(exact.effective_tol_decades, math.log10(1 + 1e-6))

    def test_operator_count(self):
        """Prueba que se exige exactamente un operador de relación."""
        for text in ('a b', 'a = b = c', 'a ~ b = c'):
            with self.subTest(text=text):
                with self.assertRaises(ExpressionSyntaxError):
                    parse_relation(text)
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse_relation('a = b ~ c')
        self.assertEqual(ctx.exception.position, 6)

    def test_bad_annotations(self):
        """Prueba los errores de anotación."""
        cases = [
            '@weight(2) a ~ b',
            '@name(x) @name(y) a ~ b',
            '@tol(decades=-1) a ~ b',
            '@tol(decades=1) a = b',
            '@let(1x=2) a ~ b',
            '@defines(2N) a ~ b',
        ]
        for text in cases:
            with self.subTest(text=text):
                with self.assertRaises(ExpressionSyntaxError):
                    parse_relation(text)

    def test_expression_positions(self):
        """Prueba que los errores de la derecha cuentan desde el inicio de la línea."""
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse_relation('@name(X) a ~ b +')
        self.assertEqual(ctx.exception.position, 16)

    def test_format_round_trip(self):
        """Prueba que formatear y releer es estable."""
        lines = [
            '@name(R1) @paper(schwarzschild-compton) @tol(decades=0.5) G*m_P/c^2 ~ hbar/(m_P*c)',
            '@name(R8) @tol(decades=0.5) @defines(N) l ~ R/N^(1/2)',
            '@let(m=m_P, L=hbar^2/(2*m^3*G)) G*m^2/L = 2*m^5*G^2/hbar^2',
        ]
        for line in lines:
            with self.subTest(line=line):
                self.assertEqual(format_relation(parse_relation(line)), line)
                self.assertEqual(parse_relation(format_relation(parse_relation(line))), parse_relation(line))


class TestSolve(unittest.TestCase):
    """Pruebas para el despeje algebraico."""

    def setUp(self):
        self.env = catalog_environment(default_registry())

    def test_isolate(self):
        """Prueba la forma cerrada de varias incógnitas."""
        cases = [
            ('m = (hbar^2*H/(G*c))^(1/3)', 'm', '(hbar^2*H/(G*c))^(1/3)'),
            ('hbar/m_pi ~ l*c', 'l', 'hbar/m_pi/c'),
            ('l ~ R/N^(1/2)', 'N', '(R/l)^2'),
            ('a/x = b', 'x', 'a/b'),
        ]
        for text, unknown, expected in cases:
            with self.subTest(text=text):
                self.assertEqual(format_expr(isolate(parse_relation(text), unknown)), expected)

    def test_solve_weinberg_mass(self):
        """Prueba la masa de Weinberg obtenida con el registro por defecto."""
        value = solve_for(parse_relation('m = (hbar^2*H/(G*c))^(1/3)'), 'm', self.env)
        self.assertEqual(value.dimension, Dimension.of(M=1))
        self.assertAlmostEqual(value.magnitude / 1.0805e-25, 1.0, delta=1e-3)

    def test_even_root_is_positive(self):
        """Prueba que las raíces pares devuelven la raíz positiva."""
        value = solve_for(parse_relation('x^2 = 4'), 'x', {})
        self.assertEqual(value, Quantity(2.0))

    def test_not_isolatable(self):
        """Prueba los casos que no se pueden despejar."""
        cases = [
            ('x + 1 = 2', 'x'),
            ('x*x = 4', 'x'),
            ('a = b', 'x'),
            ('x^0 = 1', 'x'),
        ]
        for text, unknown in cases:
            with self.subTest(text=text):
                with self.assertRaises(NotIsolatable):
                    isolate(parse_relation(text), unknown)

    def test_let_bindings(self):
        """Prueba que los enlaces locales se evalúan en orden."""
        rel = parse_relation('@let(m=m_P, L=hbar^2/(2*m^3*G)) G*m^2/L = 2*m^5*G^2/hbar^2')
        scope = relation_environment(rel, self.env)
        self.assertEqual(scope['m'], self.env['m_P'])
        self.assertEqual(scope['L'].dimension, Dimension.of(L=1))
        lhs, rhs, verdict = check_relation(rel, self.env)
        self.assertTrue(verdict.passed)
        self.assertEqual(lhs.dimension, Dimension.of(M=1, L=2, T=-2))

    def test_tolerance_override(self):
        """Prueba que la tolerancia global solo afecta a las relaciones '~'."""
        rel = parse_relation('@tol(decades=0.1) 10*cm ~ cm')
        self.assertFalse(check_relation(rel, self.env)[2].passed)
        self.assertTrue(check_relation(rel, self.env, tol_override=1.5)[2].passed)
        exact = parse_relation('10*cm = cm')
        self.assertFalse(check_relation(exact, self.env, tol_override=5.0)[2].passed)

    def test_unknown_symbol(self):
        """Prueba que un símbolo desconocido en una relación es un error."""
        with self.assertRaises(UnknownSymbol):
            check_relation(parse_relation('Q ~ 1'), self.env)


if __name__ == '__main__':
    unittest.main()
