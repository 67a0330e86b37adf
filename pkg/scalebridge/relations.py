"""
Relaciones del catálogo: dos expresiones unidas por '=' (igualdad exacta) o
'~' (orden de magnitud), con anotaciones opcionales al principio de la línea::

    @name(R2) @paper(planck-gravity-dominance) @tol(decades=2.5) G*m_P^2/e^2 ~ 1

Anotaciones reconocidas: ``@name``, ``@paper``, ``@tol(decades=...)``,
``@let(sym=expr, ...)`` (enlaces locales evaluados en orden) y
``@defines(SYM)`` (símbolo del registro que la fila define).
"""

import math
import logging
from collections import ChainMap
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

from scalebridge.dimensions import CoincidenceVerdict, Quantity, coincide
from scalebridge.errors import ExpressionSyntaxError, NotIsolatable
from scalebridge.expressions import (
    IDENTIFIER_RE,
    Difference,
    Expr,
    Power,
    Product,
    Quotient,
    Sum,
    SymbolRef,
    byte_offset,
    count_symbol,
    evaluate,
    format_expr,
    parse_expression,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL_DECADES = 2.0
EXACT_RELATIVE_TOL = 1e-6
ANNOTATIONS = ('name', 'paper', 'tol', 'let', 'defines')


class RelationOperator(Enum):
    EXACT = '='
    ORDER = '~'


@dataclass(frozen=True)
class Relation:
    lhs: Expr
    rhs: Expr
    operator: RelationOperator = RelationOperator.ORDER
    tol_decades: float = DEFAULT_TOL_DECADES
    name: str = ''
    paper_tag: str = ''
    bindings: Tuple[Tuple[str, Expr], ...] = ()
    defines: Optional[str] = None

    def __post_init__(self):
        if self.tol_decades < 0 or not math.isfinite(self.tol_decades):
            raise ValueError(f"tol_decades must be finite and >= 0, got {self.tol_decades}")

    @property
    def effective_tol_decades(self) -> float:
        """Tolerancia en décadas; la igualdad exacta usa 1e-6 relativo."""
        if self.operator is RelationOperator.EXACT:
            return math.log10(1.0 + EXACT_RELATIVE_TOL)
        return self.tol_decades


def _scan_parenthesized(text: str, start: int) -> int:
    """Devuelve el índice del ')' que cierra el '(' en ``start``."""
    depth = 0
    for index in range(start, len(text)):
        if text[index] == '(':
            depth += 1
        elif text[index] == ')':
            depth -= 1
            if depth == 0:
                return index
    raise ExpressionSyntaxError("Unterminated annotation", byte_offset(text, start))


def _split_top_level(content: str, sep: str = ',') -> List[Tuple[int, str]]:
    parts, depth, start = [], 0, 0
    for index, char in enumerate(content):
        if char == '(':
            depth += 1
        elif char == ')':
            depth -= 1
        elif char == sep and depth == 0:
            parts.append((start, content[start:index]))
            start = index + 1
    parts.append((start, content[start:]))
    return parts


def parse_relation(text: str) -> Relation:
    """Analiza una línea del catálogo.

    Args:
        text: Relación con anotaciones opcionales

    Returns:
        La relación analizada

    Raises:
        ExpressionSyntaxError: Cero o varios operadores de relación, o
            anotación mal formada
        LexError: Carácter no válido en una expresión
    """
    found: Dict[str, object] = {}
    index = 0
    while True:
        while index < len(text) and text[index].isspace():
            index += 1
        if index >= len(text) or text[index] != '@':
            break
        at = index
        index += 1
        while index < len(text) and text[index].isalpha():
            index += 1
        kind = text[at + 1:index]
        if kind not in ANNOTATIONS:
            raise ExpressionSyntaxError(f"Unknown annotation '@{kind}'", byte_offset(text, at))
        if kind in found:
            raise ExpressionSyntaxError(f"Duplicate annotation '@{kind}'", byte_offset(text, at))
        if index >= len(text) or text[index] != '(':
            raise ExpressionSyntaxError(f"Expected '(' after '@{kind}'", byte_offset(text, index))
        close = _scan_parenthesized(text, index)
        found[kind] = _parse_annotation(kind, text, index + 1, close)
        index = close + 1

    body_start = index
    operators = [i for i in range(body_start, len(text)) if text[i] in '=~']
    if len(operators) != 1:
        position = operators[1] if len(operators) > 1 else body_start
        raise ExpressionSyntaxError(
            f"Expected exactly one relation operator '=' or '~', found {len(operators)}",
            byte_offset(text, position))
    op_index = operators[0]
    operator = RelationOperator(text[op_index])
    lhs = parse_expression(text[body_start:op_index], byte_offset(text, body_start))
    rhs = parse_expression(text[op_index + 1:], byte_offset(text, op_index + 1))

    if 'tol' in found and operator is RelationOperator.EXACT:
        raise ExpressionSyntaxError("@tol only applies to '~' relations", byte_offset(text, op_index))
    return Relation(
        lhs=lhs,
        rhs=rhs,
        operator=operator,
        tol_decades=found.get('tol', DEFAULT_TOL_DECADES),
        name=found.get('name', ''),
        paper_tag=found.get('paper', ''),
        bindings=found.get('let', ()),
        defines=found.get('defines'),
    )


def _parse_annotation(kind: str, text: str, start: int, end: int):
    content = text[start:end]
    position = byte_offset(text, start)
    if kind in ('name', 'paper'):
        return content.strip()
    if kind == 'defines':
        symbol = content.strip()
        if not IDENTIFIER_RE.match(symbol):
            raise ExpressionSyntaxError(f"Invalid symbol in @defines: {symbol!r}", position)
        return symbol
    if kind == 'tol':
        key, sep, value = content.partition('=')
        if key.strip() != 'decades' or not sep:
            raise ExpressionSyntaxError("Expected @tol(decades=<number>)", position)
        try:
            tol = float(value)
        except ValueError:
            raise ExpressionSyntaxError(f"Invalid tolerance {value.strip()!r}", position) from None
        if tol < 0 or not math.isfinite(tol):
            raise ExpressionSyntaxError(f"Tolerance must be >= 0, got {tol}", position)
        return tol
    # let
    bindings = []
    for part_start, part in _split_top_level(content):
        symbol, sep, expression = part.partition('=')
        symbol = symbol.strip()
        if not sep or not IDENTIFIER_RE.match(symbol):
            raise ExpressionSyntaxError("Expected @let(symbol=expression, ...)",
                                        byte_offset(text, start + part_start))
        expr_start = start + part_start + part.index('=') + 1
        bindings.append((symbol, parse_expression(expression, byte_offset(text, expr_start))))
    return tuple(bindings)


def format_relation(rel: Relation) -> str:
    """Línea canónica del catálogo (la que emite ``catalog export``)."""
    parts = []
    if rel.name:
        parts.append(f"@name({rel.name})")
    if rel.paper_tag:
        parts.append(f"@paper({rel.paper_tag})")
    if rel.operator is RelationOperator.ORDER:
        parts.append(f"@tol(decades={rel.tol_decades!r})")
    if rel.bindings:
        lets = ', '.join(f"{symbol}={format_expr(expr)}" for symbol, expr in rel.bindings)
        parts.append(f"@let({lets})")
    if rel.defines:
        parts.append(f"@defines({rel.defines})")
    parts.append(f"{format_expr(rel.lhs)} {rel.operator.value} {format_expr(rel.rhs)}")
    return ' '.join(parts)


def relation_environment(rel: Relation, env: Mapping[str, Quantity]) -> Mapping[str, Quantity]:
    """Entorno con los enlaces ``@let`` evaluados en orden sobre ``env``."""
    local: Dict[str, Quantity] = {}
    scope = ChainMap(local, env)
    for symbol, expr in rel.bindings:
        local[symbol] = evaluate(expr, scope)
    return scope


def isolate(rel: Relation, unknown: str) -> Expr:
    """Despeja ``unknown`` invirtiendo productos, cocientes y potencias.

    Args:
        rel: Relación (el operador '~' se trata como igualdad)
        unknown: Símbolo a despejar

    Returns:
        Expresión cerrada para la incógnita

    Raises:
        NotIsolatable: Si la incógnita aparece cero o varias veces, o bajo
            una suma o resta
    """
    occurrences = count_symbol(rel.lhs, unknown) + count_symbol(rel.rhs, unknown)
    if occurrences != 1:
        raise NotIsolatable(f"'{unknown}' occurs {occurrences} times in the relation; exactly one is required")
    if count_symbol(rel.lhs, unknown):
        node, other = rel.lhs, rel.rhs
    else:
        node, other = rel.rhs, rel.lhs

    while not (isinstance(node, SymbolRef) and node.name == unknown):
        if isinstance(node, Product):
            if count_symbol(node.left, unknown):
                other, node = Quotient(other, node.right), node.left
            else:
                other, node = Quotient(other, node.left), node.right
        elif isinstance(node, Quotient):
            if count_symbol(node.numerator, unknown):
                other, node = Product(other, node.denominator), node.numerator
            else:
                other, node = Quotient(node.numerator, other), node.denominator
        elif isinstance(node, Power):
            if node.exponent == 0:
                raise NotIsolatable(f"'{unknown}' is under a zeroth power")
            other, node = Power(other, 1 / node.exponent), node.base
        elif isinstance(node, (Sum, Difference)):
            raise NotIsolatable(f"'{unknown}' occurs under '+' or '-'; additive isolation is not supported")
        else:
            raise NotIsolatable(f"Cannot isolate '{unknown}' in {format_expr(node)}")
    return other


def solve_for(rel: Relation, unknown: str, env: Mapping[str, Quantity]) -> Quantity:
    """Resuelve la relación para ``unknown`` y evalúa la forma cerrada.

    Para potencias con denominador par se toma la raíz positiva.
    """
    closed = isolate(rel, unknown)
    logger.debug(f"Isolated {unknown} = {format_expr(closed)}")
    return evaluate(closed, relation_environment(rel, env))


def check_relation(rel: Relation, env: Mapping[str, Quantity],
                   tol_override: Optional[float] = None) -> Tuple[Quantity, Quantity, CoincidenceVerdict]:
    """Evalúa los dos lados y emite el veredicto.

    Args:
        rel: Relación a comprobar
        env: Entorno de evaluación
        tol_override: Tolerancia en décadas para relaciones '~'

    Returns:
        (lado izquierdo, lado derecho, veredicto)
    """
    scope = relation_environment(rel, env)
    lhs = evaluate(rel.lhs, scope)
    rhs = evaluate(rel.rhs, scope)
    tol = rel.effective_tol_decades
    if tol_override is not None and rel.operator is RelationOperator.ORDER:
        tol = tol_override
    return lhs, rhs, coincide(lhs, rhs, tol)
