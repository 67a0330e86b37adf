"""
Lenguaje de expresiones del catálogo: AST, analizador, impresión y evaluación.

Gramática (precedencia de menor a mayor)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := primary ('^' exponent)?
    exponent := rational ('^' exponent)?
    rational := ['-'] NUMBER | '(' ['-'] NUMBER ['/' ['-'] NUMBER] ')'
    primary  := NUMBER | IDENT | '(' expr ')'

Los exponentes son siempre racionales literales. El menos unario se
normaliza a ``Difference(0, x)``.
"""

import re
import logging
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import List, Mapping, NamedTuple, Set, Union

from scalebridge.dimensions import DIMENSIONLESS, Quantity, quantity_arith, quantity_pow
from scalebridge.errors import DimensionMismatch, ExpressionSyntaxError, LexError, UnknownSymbol

logger = logging.getLogger(__name__)

IDENTIFIER_RE = re.compile(r'[A-Za-z_][A-Za-z0-9_]*\Z')


@dataclass(frozen=True)
class SymbolRef:
    name: str

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.name):
            raise ValueError(f"Invalid identifier: {self.name!r}")


@dataclass(frozen=True)
class Literal:
    """Número adimensional ``mantissa × 10^exponent`` con mantisa no negativa."""

    mantissa: Decimal
    exponent: int = 0

    def __post_init__(self):
        mantissa = Decimal(self.mantissa)
        if not mantissa.is_finite() or mantissa < 0:
            raise ValueError(f"Literal mantissa must be finite and >= 0: {self.mantissa!r}")
        # abs() normaliza el -0
        object.__setattr__(self, 'mantissa', abs(mantissa))

    @property
    def value(self) -> float:
        return float(f"{format(self.mantissa, 'f')}e{self.exponent}")


@dataclass(frozen=True)
class Product:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Quotient:
    numerator: 'Expr'
    denominator: 'Expr'


@dataclass(frozen=True)
class Sum:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Difference:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Power:
    base: 'Expr'
    exponent: Fraction

    def __post_init__(self):
        object.__setattr__(self, 'exponent', Fraction(self.exponent))


Expr = Union[SymbolRef, Literal, Product, Quotient, Sum, Difference, Power]

ZERO = Literal(Decimal(0))


class Token(NamedTuple):
    kind: str  # NUMBER, IDENT, OP, EOF
    text: str
    position: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode('utf-8'))


def tokenize(text: str, offset: int = 0) -> List[Token]:
    """Divide una expresión en tokens.

    Args:
        text: Texto de la expresión
        offset: Desplazamiento en bytes del texto dentro de la línea original

    Returns:
        Lista de tokens terminada en EOF

    Raises:
        LexError: Si aparece un carácter no reconocido
    """
    tokens = []
    index = 0
    while index < len(text):
        match = _TOKEN_RE.match(text, index)
        if match is None:
            raise LexError(f"Unexpected character {text[index]!r}",
                           offset + byte_offset(text, index))
        kind = match.lastgroup
        if kind != 'ws':
            tokens.append(Token(kind.upper(), match.group(), offset + byte_offset(text, index)))
        index = match.end()
    tokens.append(Token('EOF', '', offset + byte_offset(text, len(text))))
    return tokens


def _split_number(text: str) -> Literal:
    mantissa, _, exponent = text.lower().partition('e')
    return Literal(Decimal(mantissa), int(exponent) if exponent else 0)


class _Parser:
    """Analizador descendente recursivo sobre la lista de tokens."""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != 'EOF':
            self.index += 1
        return token

    def accept(self, text: str) -> bool:
        if self.current.kind == 'OP' and self.current.text == text:
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not (self.current.kind == 'OP' and self.current.text == text):
            self.fail(f"Expected '{text}'")
        return self.advance()

    def fail(self, message: str):
        token = self.current
        found = 'end of input' if token.kind == 'EOF' else repr(token.text)
        raise ExpressionSyntaxError(f"{message}, found {found}", token.position)

    def parse(self) -> Expr:
        expr = self.parse_expr()
        if self.current.kind != 'EOF':
            self.fail("Unexpected token")
        return expr

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while True:
            if self.accept('+'):
                node = Sum(node, self.parse_term())
            elif self.accept('-'):
                node = Difference(node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while True:
            if self.accept('*'):
                node = Product(node, self.parse_unary())
            elif self.accept('/'):
                node = Quotient(node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Expr:
        if self.accept('-'):
            return Difference(ZERO, self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_primary()
        if self.accept('^'):
            return Power(base, self.parse_exponent())
        return base

    def parse_exponent(self) -> Fraction:
        start = self.current
        if self.accept('('):
            value = self.parse_signed_number()
            if self.accept('/'):
                denominator = self.parse_signed_number()
                if denominator == 0:
                    raise ExpressionSyntaxError("Zero denominator in exponent", start.position)
                value = value / denominator
            self.expect(')')
        else:
            value = self.parse_signed_number()
        if self.accept('^'):
            # '^' asocia a la derecha: a^2^3 == a^8
            upper = self.parse_exponent()
            if upper.denominator != 1 or (value == 0 and upper < 0):
                raise ExpressionSyntaxError("Chained exponent must be an integer power",
                                            start.position)
            value = value ** int(upper)
        return value

    def parse_signed_number(self) -> Fraction:
        negative = self.accept('-')
        token = self.current
        if token.kind != 'NUMBER':
            self.fail("Exponent must be a rational literal")
        self.advance()
        try:
            value = Fraction(Decimal(token.text))
        except InvalidOperation:
            raise ExpressionSyntaxError(f"Invalid number {token.text!r}", token.position)
        return -value if negative else value

    def parse_primary(self) -> Expr:
        token = self.current
        if token.kind == 'NUMBER':
            self.advance()
            return _split_number(token.text)
        if token.kind == 'IDENT':
            self.advance()
            return SymbolRef(token.text)
        if self.accept('('):
            node = self.parse_expr()
            self.expect(')')
            return node
        self.fail("Expected a number, a symbol or '('")


def parse_expression(text: str, offset: int = 0) -> Expr:
    """Analiza una expresión y devuelve su AST.

    Args:
        text: Texto de la expresión, p. ej. ``"G*m_P^2/e^2"``
        offset: Desplazamiento de ``text`` dentro de la línea original (para
            los mensajes de error)

    Raises:
        LexError: Carácter no válido
        ExpressionSyntaxError: Token inesperado
    """
    return _Parser(tokenize(text, offset)).parse()


def _precedence(e: Expr) -> int:
    if isinstance(e, (Sum, Difference)):
        return 1
    if isinstance(e, (Product, Quotient)):
        return 2
    if isinstance(e, Power):
        return 4
    return 5


def _format_exponent(r: Fraction) -> str:
    if r.denominator == 1:
        return str(r.numerator)
    return f"({r.numerator}/{r.denominator})"


def format_expr(e: Expr) -> str:
    """Impresión canónica con el mínimo de paréntesis.

    ``parse_expression(format_expr(e)) == e`` para todo AST válido.
    """
    if isinstance(e, SymbolRef):
        return e.name
    if isinstance(e, Literal):
        mantissa = format(e.mantissa, 'f')
        return f"{mantissa}e{e.exponent}" if e.exponent else mantissa
    if isinstance(e, Power):
        base = format_expr(e.base)
        if _precedence(e.base) < 5:
            base = f"({base})"
        return f"{base}^{_format_exponent(e.exponent)}"

    if isinstance(e, (Product, Quotient)):
        own, symbol = 2, '*' if isinstance(e, Product) else '/'
        left, right = (e.left, e.right) if isinstance(e, Product) else (e.numerator, e.denominator)
    elif isinstance(e, (Sum, Difference)):
        own, symbol = 1, ' + ' if isinstance(e, Sum) else ' - '
        left, right = e.left, e.right
    else:
        raise TypeError(f"Not an expression node: {e!r}")

    left_text = format_expr(left)
    if _precedence(left) < own:
        left_text = f"({left_text})"
    right_text = format_expr(right)
    if _precedence(right) <= own:
        right_text = f"({right_text})"
    return f"{left_text}{symbol}{right_text}"


def symbols(e: Expr) -> Set[str]:
    """Nombres de todos los símbolos referenciados."""
    if isinstance(e, SymbolRef):
        return {e.name}
    if isinstance(e, Literal):
        return set()
    if isinstance(e, Power):
        return symbols(e.base)
    return set().union(*(symbols(child) for child in children(e)))


def children(e: Expr) -> tuple:
    if isinstance(e, (Product, Sum, Difference)):
        return (e.left, e.right)
    if isinstance(e, Quotient):
        return (e.numerator, e.denominator)
    if isinstance(e, Power):
        return (e.base,)
    return ()


def count_symbol(e: Expr, name: str) -> int:
    if isinstance(e, SymbolRef):
        return int(e.name == name)
    return sum(count_symbol(child, name) for child in children(e))


def _is_zero_literal(e: Expr) -> bool:
    return isinstance(e, Literal) and e.mantissa == 0


def evaluate(e: Expr, env: Mapping[str, Quantity]) -> Quantity:
    """Evalúa un AST de abajo arriba con la aritmética dimensional.

    Args:
        e: Expresión
        env: Símbolos disponibles (registro de constantes más enlaces locales)

    Returns:
        La magnitud resultante

    Raises:
        UnknownSymbol: Símbolo sin valor en ``env``
        DimensionMismatch: Suma o resta entre dimensiones distintas
        NegativeBase, DivisionByZero, QuantityOverflow: Desde la aritmética
    """
    if isinstance(e, SymbolRef):
        try:
            return env[e.name]
        except KeyError:
            raise UnknownSymbol(e.name) from None
    if isinstance(e, Literal):
        return Quantity(e.value, DIMENSIONLESS)
    if isinstance(e, Power):
        return quantity_pow(evaluate(e.base, env), e.exponent)
    if isinstance(e, Product):
        return quantity_arith(evaluate(e.left, env), evaluate(e.right, env), 'multiply')
    if isinstance(e, Quotient):
        return quantity_arith(evaluate(e.numerator, env), evaluate(e.denominator, env), 'divide')
    if isinstance(e, (Sum, Difference)):
        left = evaluate(e.left, env)
        right = evaluate(e.right, env)
        # un cero literal toma la dimensión del otro operando
        if _is_zero_literal(e.left):
            left = Quantity(0.0, right.dimension)
        elif _is_zero_literal(e.right):
            right = Quantity(0.0, left.dimension)
        if left.dimension != right.dimension:
            raise DimensionMismatch(
                f"Dimension mismatch in '{format_expr(e)}': "
                f"[{left.dimension}] vs [{right.dimension}]")
        return quantity_arith(left, right, 'add' if isinstance(e, Sum) else 'subtract')
    raise TypeError(f"Not an expression node: {e!r}")
