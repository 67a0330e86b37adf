"""
Álgebra dimensional exacta y aritmética de magnitudes.

Las dimensiones son exponentes racionales sobre las bases M, L y T (sistema
CGS-Gaussiano: la carga tiene dimensión M^1/2 L^3/2 T^-1, por eso los
exponentes no son enteros).
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Literal, Tuple, Union

from scalebridge.errors import (
    DimensionMismatch,
    DivisionByZero,
    NegativeBase,
    NonPositive,
    QuantityOverflow,
)

logger = logging.getLogger(__name__)

BASE_DIMENSIONS = ('M', 'L', 'T')

Rational = Union[Fraction, int]
ArithOp = Literal['multiply', 'divide', 'add', 'subtract']


@dataclass(frozen=True)
class Dimension:
    """Exponentes racionales sobre {M, L, T} en forma canónica.

    Las entradas con exponente cero no se guardan, así la igualdad es
    estructural.
    """

    terms: Tuple[Tuple[str, Fraction], ...] = ()

    @classmethod
    def of(cls, **exponents: Rational) -> 'Dimension':
        """Construye una dimensión, p. ej. ``Dimension.of(M=1, L=2, T=-1)``."""
        unknown = set(exponents) - set(BASE_DIMENSIONS)
        if unknown:
            raise ValueError(f"Unknown base dimensions: {sorted(unknown)}")
        return cls._canonical({k: Fraction(v) for k, v in exponents.items()})

    @classmethod
    def _canonical(cls, exponents: Dict[str, Fraction]) -> 'Dimension':
        return cls(tuple(
            (base, exponents[base]) for base in BASE_DIMENSIONS
            if exponents.get(base, 0) != 0
        ))

    @property
    def exponents(self) -> Dict[str, Fraction]:
        return dict(self.terms)

    @property
    def is_dimensionless(self) -> bool:
        return not self.terms

    def __str__(self) -> str:
        if not self.terms:
            return 'dimensionless'
        return ' '.join(f"{base}^{exp}" for base, exp in self.terms)

    def __mul__(self, other: 'Dimension') -> 'Dimension':
        return dim_combine(self, other, 'multiply')

    def __truediv__(self, other: 'Dimension') -> 'Dimension':
        return dim_combine(self, other, 'divide')

    def __pow__(self, r: Rational) -> 'Dimension':
        return dim_pow(self, r)


DIMENSIONLESS = Dimension()


def dim_combine(a: Dimension, b: Dimension, op: Literal['multiply', 'divide']) -> Dimension:
    """Suma (multiply) o resta (divide) exponente a exponente."""
    sign = {'multiply': 1, 'divide': -1}[op]
    ea, eb = a.exponents, b.exponents
    return Dimension._canonical({
        base: ea.get(base, Fraction(0)) + sign * eb.get(base, Fraction(0))
        for base in BASE_DIMENSIONS
    })


def dim_pow(a: Dimension, r: Rational) -> Dimension:
    r = Fraction(r)
    return Dimension._canonical({base: exp * r for base, exp in a.terms})


@dataclass(frozen=True)
class Quantity:
    """Magnitud en coma flotante doble con su dimensión."""

    magnitude: float
    dimension: Dimension = DIMENSIONLESS

    def __post_init__(self):
        if not math.isfinite(self.magnitude):
            raise QuantityOverflow(f"Non-finite magnitude {self.magnitude!r}")
        object.__setattr__(self, 'magnitude', float(self.magnitude))

    def __str__(self) -> str:
        return f"{format_display(self.magnitude)}  {self.dimension}"

    def __mul__(self, other: 'Quantity') -> 'Quantity':
        return quantity_arith(self, other, 'multiply')

    def __truediv__(self, other: 'Quantity') -> 'Quantity':
        return quantity_arith(self, other, 'divide')

    def __add__(self, other: 'Quantity') -> 'Quantity':
        return quantity_arith(self, other, 'add')

    def __sub__(self, other: 'Quantity') -> 'Quantity':
        return quantity_arith(self, other, 'subtract')

    def __pow__(self, r: Rational) -> 'Quantity':
        return quantity_pow(self, r)


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise QuantityOverflow(f"{what} overflowed to {value!r}")
    return value


def quantity_arith(a: Quantity, b: Quantity, op: ArithOp) -> Quantity:
    """Combina dos magnitudes.

    Args:
        a: Operando izquierdo
        b: Operando derecho
        op: 'multiply', 'divide', 'add' o 'subtract'

    Returns:
        El resultado con su dimensión

    Raises:
        DimensionMismatch: Suma o resta entre dimensiones distintas
        DivisionByZero: Divisor con magnitud cero
        QuantityOverflow: Resultado no finito
    """
    if op in ('add', 'subtract'):
        if a.dimension != b.dimension:
            raise DimensionMismatch(
                f"Cannot {op} [{a.dimension}] and [{b.dimension}]")
        value = a.magnitude + b.magnitude if op == 'add' else a.magnitude - b.magnitude
        return Quantity(_finite(value, op), a.dimension)
    if op == 'multiply':
        return Quantity(_finite(a.magnitude * b.magnitude, op),
                        dim_combine(a.dimension, b.dimension, 'multiply'))
    if op == 'divide':
        if b.magnitude == 0.0:
            raise DivisionByZero(f"Division of {a} by zero")
        return Quantity(_finite(a.magnitude / b.magnitude, op),
                        dim_combine(a.dimension, b.dimension, 'divide'))
    raise ValueError(f"Unknown operation: {op}")


def quantity_pow(a: Quantity, r: Rational) -> Quantity:
    """Eleva una magnitud a un exponente racional.

    Una base negativa solo admite exponentes con denominador impar.

    Raises:
        NegativeBase: Potencia con denominador par de una magnitud negativa
        DivisionByZero: Exponente negativo sobre una magnitud cero
        QuantityOverflow: Resultado no finito
    """
    r = Fraction(r)
    x = a.magnitude
    if r == 0:
        return Quantity(1.0, DIMENSIONLESS)
    if x == 0.0 and r < 0:
        raise DivisionByZero(f"Zero raised to negative power {r}")
    if x < 0 and r.denominator % 2 == 0:
        raise NegativeBase(f"Cannot raise negative magnitude {x!r} to power {r}")
    try:
        if r.denominator == 1:
            value = x ** r.numerator
        else:
            value = math.pow(abs(x), float(r))
            if x < 0 and r.numerator % 2 == 1:
                value = -value
    except (OverflowError, ZeroDivisionError) as e:
        raise QuantityOverflow(f"{x!r}^{r} overflowed: {e}") from e
    return Quantity(_finite(float(value), 'power'), dim_pow(a.dimension, r))


def log10_magnitude(a: Quantity) -> float:
    if a.magnitude <= 0.0:
        raise NonPositive(f"log10 of non-positive magnitude {a.magnitude!r}")
    return math.log10(a.magnitude)


@dataclass(frozen=True)
class CoincidenceVerdict:
    """Resultado del operador "∼": cociente en décadas y puerta dimensional."""

    log10_ratio: float
    tol_decades: float
    dimensions_match: bool
    passed: bool


def coincide(a: Quantity, b: Quantity, tol_decades: float) -> CoincidenceVerdict:
    """Compara dos magnitudes en órdenes de magnitud.

    La igualdad dimensional es obligatoria: si falla, el veredicto es negativo
    sea cual sea el cociente.
    """
    if not tol_decades >= 0:
        raise ValueError(f"tol_decades must be >= 0, got {tol_decades}")
    ratio = log10_magnitude(a) - log10_magnitude(b)
    match = a.dimension == b.dimension
    return CoincidenceVerdict(
        log10_ratio=ratio,
        tol_decades=tol_decades,
        dimensions_match=match,
        passed=match and abs(ratio) <= tol_decades,
    )


def format_display(value: float) -> str:
    """Notación científica con 9 cifras significativas (salida de terminal)."""
    return f"{value:.8e}"


def format_magnitude(value: float) -> str:
    """Notación científica con 9 cifras significativas.

    Si 9 cifras no reproducen el valor exacto, se amplía hasta la forma más
    corta que sí lo hace.
    """
    for digits in range(8, 17):
        text = f"{value:.{digits}e}"
        if float(text) == value:
            return text
    return f"{value:.16e}"
