import unittest
from decimal import Decimal
from fractions import Fraction

from hypothesis import given, settings, strategies as st

import test_init

from scalebridge.dimensions import Dimension, Quantity
from scalebridge.errors import DimensionMismatch, ExpressionSyntaxError, LexError, UnknownSymbol
from scalebridge.expressions import (
    Difference,
    Literal,
    Power,
    Product,
    Quotient,
    Sum,
    SymbolRef,
    ZERO,
    evaluate,
    format_expr,
    parse_expression,
    symbols,
    tokenize,
)
from scalebridge.catalog import catalog_environment
from scalebridge.registry import default_registry

MAX_DEPTH = 8

identifiers = st.sampled_from(['G', 'c', 'hbar', 'm_P', 'm_pi', 'R', 'x', 'y_2', '_tmp', 'L_ref'])
literals = st.builds(
    Literal,
    st.decimals(min_value=0, max_value=10 ** 6, places=3, allow_nan=False, allow_infinity=False).map(abs),
    st.integers(min_value=-60, max_value=60),
)
exponents = st.fractions(min_value=-12, max_value=12, max_denominator=9)
leaves = st.one_of(identifiers.map(SymbolRef), literals)


def _extend(children):
    return st.one_of(
        st.builds(Product, children, children),
        st.builds(Quotient, children, children),
        st.builds(Sum, children, children),
        st.builds(Difference, children, children),
        st.builds(Power, children, exponents),
    )


expressions = st.recursive(leaves, _extend, max_leaves=MAX_DEPTH * 2)


def depth(e) -> int:
    if isinstance(e, (SymbolRef, Literal)):
        return 1
    if isinstance(e, Power):
        return 1 + depth(e.base)
    if isinstance(e, Quotient):
        return 1 + max(depth(e.numerator), depth(e.denominator))
    return 1 + max(depth(e.left), depth(e.right))


class TestParser(unittest.TestCase):
    """Pruebas para el analizador de expresiones."""

    def test_precedence(self):
        """Prueba la precedencia y la asociatividad."""
        a, b, c = SymbolRef('a'), SymbolRef('b'), SymbolRef('c')
        cases = [
            ('a + b*c', Sum(a, Product(b, c))),
            ('a - b - c', Difference(Difference(a, b), c)),
            ('a/b/c', Quotient(Quotient(a, b), c)),
            ('a*b^2', Product(a, Power(b, Fraction(2)))),
            ('-a^2', Difference(ZERO, Power(a, Fraction(2)))),
            ('(a + b)^(1/3)', Power(Sum(a, b), Fraction(1, 3))),
            ('a^-1', Power(a, Fraction(-1))),
            ('a^(-3/2)', Power(a, Fraction(-3, 2))),
            ('a^2^3', Power(a, Fraction(8))),
        ]
        for text, expected in cases:
            with self.subTest(text=text):
                self.assertEqual(parse_expression(text), expected)

    def test_literals(self):
        """Prueba la lectura de números con exponente decimal."""
        self.assertEqual(parse_expression('1e-40'), Literal(Decimal(1), -40))
        self.assertEqual(parse_expression('2.5E3'), Literal(Decimal('2.5'), 3))
        self.assertEqual(parse_expression('1e28').value, 1e28)

    def test_errors_report_position(self):
        """Prueba que los errores indican la posición del fallo."""
        with self.assertRaises(ExpressionSyntaxError) as ctx:
            parse_expression('hbar +')
        self.assertEqual(ctx.exception.position, 6)
        self.assertIn('position 6', str(ctx.exception))

        with self.assertRaises(LexError) as ctx:
            parse_expression('G # m')
        self.assertEqual(ctx.exception.position, 2)

        with self.assertRaises(ExpressionSyntaxError):
            parse_expression('x^y')
        with self.assertRaises(ExpressionSyntaxError):
            parse_expression('(a + b')

    def test_position_is_byte_offset(self):
        """Prueba que las posiciones cuentan bytes UTF-8."""
        with self.assertRaises(LexError) as ctx:
            tokenize('a*ħ')
        self.assertEqual(ctx.exception.position, 2)
        with self.assertRaises(LexError) as ctx:
            tokenize('ħ', offset=10)
        self.assertEqual(ctx.exception.position, 10)


class TestFormatter(unittest.TestCase):
    """Pruebas para la impresión canónica."""

    def test_minimal_parentheses(self):
        """Prueba que solo se imprimen los paréntesis necesarios."""
        cases = [
            'G*m_P^2/e^2',
            '(hbar^2*H/(G*c))^(1/3)',
            'a - (b - c)',
            'a/(b*c)',
            'hbar^2/(2*m^3*G)',
            '0 - x',
        ]
        for text in cases:
            with self.subTest(text=text):
                self.assertEqual(format_expr(parse_expression(text)), text)

    @settings(max_examples=10_000, deadline=None)
    @given(expressions)
    def test_round_trip(self, expr):
        """Prueba que imprimir y volver a leer reproduce el AST."""
        if depth(expr) > MAX_DEPTH:
            return
        self.assertEqual(parse_expression(format_expr(expr)), expr)


class TestEvaluate(unittest.TestCase):
    """Pruebas para la evaluación dimensional."""

    def setUp(self):
        self.env = catalog_environment(default_registry())

    def test_compton_length(self):
        """Prueba la evaluación de la longitud de Compton del pión."""
        value = evaluate(parse_expression('hbar/(m_pi*c)'), self.env)
        self.assertEqual(value.dimension, Dimension.of(L=1))
        self.assertAlmostEqual(value.magnitude / 1.41386e-13, 1.0, delta=1e-4)

    def test_unknown_symbol(self):
        """Prueba que un símbolo desconocido es un error."""
        with self.assertRaises(UnknownSymbol) as ctx:
            evaluate(parse_expression('nosuch*c'), self.env)
        self.assertEqual(ctx.exception.symbol, 'nosuch')

    def test_dimension_mismatch(self):
        """Prueba que sumar dimensiones distintas es un error."""
        with self.assertRaises(DimensionMismatch):
            evaluate(parse_expression('c + G'), self.env)

    def test_unary_minus(self):
        """Prueba que el menos unario conserva la dimensión."""
        value = evaluate(parse_expression('-c'), self.env)
        self.assertEqual(value, Quantity(-2.99792458e10, self.env['c'].dimension))

    def test_symbols(self):
        """Prueba la función symbols."""
        self.assertEqual(symbols(parse_expression('G*m_P^2/e^2 + 1')), {'G', 'm_P', 'e'})


if __name__ == '__main__':
    unittest.main()
