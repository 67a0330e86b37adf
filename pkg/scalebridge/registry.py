"""
Registro de constantes físicas en unidades CGS-Gaussianas.

Los valores por defecto pueden sobrescribirse con un fichero de texto
(``símbolo = valor expresión-de-unidades`` por línea, ``#`` para comentarios)
o desde la línea de comandos. Las entradas derivadas (M, T, l, N) se
recalculan después de aplicar las sobrescrituras, salvo que se sobrescriban
ellas mismas.
"""

import os
import hashlib
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from scalebridge.dimensions import DIMENSIONLESS, Dimension, Quantity, format_magnitude
from scalebridge.errors import ConfigError, ScalebridgeError, UnknownSymbol
from scalebridge.expressions import evaluate, parse_expression

logger = logging.getLogger(__name__)

UNIT_SYSTEM = 'CGS-Gaussian'
REGISTRY_ENV_VAR = 'SCALEBRIDGE_REGISTRY'

_ERG = Dimension.of(M=1, L=2, T=-2)

# Unidades disponibles en las expresiones de unidades
UNITS: Dict[str, Quantity] = {
    'cm': Quantity(1.0, Dimension.of(L=1)),
    'g': Quantity(1.0, Dimension.of(M=1)),
    's': Quantity(1.0, Dimension.of(T=1)),
    'erg': Quantity(1.0, _ERG),
    'dyn': Quantity(1.0, Dimension.of(M=1, L=1, T=-2)),
    'esu': Quantity(1.0, Dimension.of(M=Fraction(1, 2), L=Fraction(3, 2), T=-1)),
    'km': Quantity(1.0e5, Dimension.of(L=1)),
    'Mpc': Quantity(3.0856775814913673e24, Dimension.of(L=1)),
    'yr': Quantity(3.15576e7, Dimension.of(T=1)),
    'eV': Quantity(1.602176634e-12, _ERG),
    'MeV': Quantity(1.602176634e-6, _ERG),
}

# (símbolo, valor, unidades, descripción, procedencia)
BASE_CONSTANTS: List[Tuple[str, float, str, str, str]] = [
    ('c', 2.99792458e10, 'cm/s', 'speed of light', 'exact SI definition'),
    ('G', 6.674e-8, 'cm^3/(g*s^2)', 'gravitational constant', 'CODATA 2018, rounded'),
    ('hbar', 1.054571817e-27, 'erg*s', 'reduced Planck constant', 'CODATA 2018'),
    ('e', 4.80320471e-10, 'esu', 'elementary charge (Gaussian)', 'CODATA 2018'),
    ('m_P', 2.176e-5, 'g', 'Planck mass', 'standard value; order 1e-5 g'),
    ('m_pi', 2.488e-25, 'g', 'charged pion mass', '139.57 MeV/c^2'),
    ('H', 2.27e-18, 's^-1', 'Hubble constant', '70 km/s/Mpc'),
    ('R', 1.0e28, 'cm', 'radius of the universe', 'order-of-magnitude value 1e28 cm'),
]

# (símbolo, expresión, descripción), en orden de dependencia
DERIVED_CONSTANTS: List[Tuple[str, str, str]] = [
    ('M', 'R*c^2/G', 'mass of the universe as a black hole of radius R'),
    ('T', 'R/c', 'age of the universe, from cT = R'),
    ('l', 'hbar/(m_pi*c)', 'pion Compton wavelength'),
    ('N', '(R/l)^2', 'particle number, from l = R/N^(1/2)'),
]


@dataclass(frozen=True)
class RegistryEntry:
    symbol: str
    quantity: Quantity
    description: str = ''
    provenance: str = ''
    derived: bool = False


def unit_quantity(unit_expr: str) -> Quantity:
    """Evalúa una expresión de unidades (vacía = adimensional).

    Raises:
        ConfigError: Si la expresión no se puede analizar o evaluar
    """
    unit_expr = unit_expr.strip()
    if not unit_expr:
        return Quantity(1.0, DIMENSIONLESS)
    try:
        return evaluate(parse_expression(unit_expr), UNITS)
    except ScalebridgeError as e:
        raise ConfigError(f"Invalid unit expression '{unit_expr}': {e}") from e


def make_quantity(value: float, unit_expr: str) -> Quantity:
    return Quantity(value, DIMENSIONLESS) * unit_quantity(unit_expr)


class ConstantRegistry(Mapping):
    """Registro inmutable símbolo → magnitud.

    Se comporta como un ``Mapping`` para poder usarse directamente como
    entorno de evaluación.
    """

    unit_system = UNIT_SYSTEM

    def __init__(self, entries: Iterable[RegistryEntry]):
        self._entries: Dict[str, RegistryEntry] = {}
        for entry in entries:
            if entry.symbol in self._entries:
                raise ConfigError(f"Duplicate registry symbol '{entry.symbol}'")
            self._entries[entry.symbol] = entry

    def __getitem__(self, symbol: str) -> Quantity:
        return self._entries[symbol].quantity

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def entry(self, symbol: str) -> RegistryEntry:
        try:
            return self._entries[symbol]
        except KeyError:
            raise UnknownSymbol(symbol) from None

    def is_derived(self, symbol: str) -> bool:
        entry = self._entries.get(symbol)
        return bool(entry and entry.derived)

    def fingerprint(self) -> str:
        """Hash SHA-256 de todos los valores del registro."""
        digest = hashlib.sha256()
        for symbol in sorted(self._entries):
            q = self._entries[symbol].quantity
            digest.update(f"{symbol}={format_magnitude(q.magnitude)} [{q.dimension}]\n".encode('utf-8'))
        return digest.hexdigest()

    def describe(self) -> List[Dict[str, str]]:
        return [
            {
                'symbol': e.symbol,
                'value': format_magnitude(e.quantity.magnitude),
                'dimension': str(e.quantity.dimension),
                'description': e.description,
                'provenance': e.provenance,
                'derived': e.derived,
            }
            for e in self._entries.values()
        ]


def registry_lookup(reg: ConstantRegistry, symbol: str) -> Quantity:
    """Devuelve la magnitud de un símbolo; un símbolo desconocido es un error.

    Raises:
        UnknownSymbol: Si el símbolo no está registrado
    """
    return reg.entry(symbol).quantity


def build_registry(overrides: Optional[Iterable[Tuple[str, Quantity]]] = None) -> ConstantRegistry:
    """Construye el registro a partir de los valores por defecto.

    Args:
        overrides: Pares (símbolo, magnitud); el último gana si un símbolo se
            repite. Un símbolo existente debe conservar su dimensión.

    Returns:
        El registro con las entradas derivadas recalculadas

    Raises:
        ConfigError: Si una sobrescritura cambia la dimensión de un símbolo
    """
    override_map: Dict[str, Quantity] = {}
    for symbol, quantity in overrides or ():
        override_map[symbol] = quantity

    entries: Dict[str, RegistryEntry] = {}
    for symbol, value, unit, description, provenance in BASE_CONSTANTS:
        entries[symbol] = RegistryEntry(symbol, make_quantity(value, unit), description,
                                        f"{provenance} [{unit}]")

    derived_symbols = {symbol for symbol, _, _ in DERIVED_CONSTANTS}
    for symbol, quantity in override_map.items():
        if symbol in entries and entries[symbol].quantity.dimension != quantity.dimension:
            raise ConfigError(
                f"Override for '{symbol}' has dimension [{quantity.dimension}], "
                f"expected [{entries[symbol].quantity.dimension}]")
        if symbol in derived_symbols:
            continue
        previous = entries.get(symbol)
        entries[symbol] = RegistryEntry(
            symbol, quantity,
            previous.description if previous else 'user-defined symbol',
            'override')
        logger.debug(f"Registry override {symbol} = {quantity}")

    for symbol, expression, description in DERIVED_CONSTANTS:
        env = {name: entry.quantity for name, entry in entries.items()}
        computed = evaluate(parse_expression(expression), env)
        if symbol in override_map:
            quantity = override_map[symbol]
            if quantity.dimension != computed.dimension:
                raise ConfigError(
                    f"Override for '{symbol}' has dimension [{quantity.dimension}], "
                    f"expected [{computed.dimension}]")
            entries[symbol] = RegistryEntry(symbol, quantity, description, 'override')
        else:
            entries[symbol] = RegistryEntry(symbol, computed, description,
                                            f"derived: {symbol} = {expression}", derived=True)

    return ConstantRegistry(entries.values())


def default_registry() -> ConstantRegistry:
    return build_registry()


def parse_registry_line(line: str) -> Optional[Tuple[str, Quantity]]:
    """Analiza una línea ``símbolo = valor unidades``.

    Returns:
        El par (símbolo, magnitud) o None para líneas vacías o comentarios

    Raises:
        ConfigError: Si la línea está mal formada
    """
    text = line.split('#', 1)[0].strip()
    if not text:
        return None
    symbol, sep, rest = text.partition('=')
    symbol = symbol.strip()
    if not sep or not symbol.isidentifier():
        raise ConfigError(f"Expected 'symbol = value unit-expression', got {line.strip()!r}")
    parts = rest.strip().split(None, 1)
    if not parts:
        raise ConfigError(f"Missing value for '{symbol}'")
    try:
        value = float(parts[0])
    except ValueError:
        raise ConfigError(f"Invalid numeric value {parts[0]!r} for '{symbol}'") from None
    return symbol, make_quantity(value, parts[1] if len(parts) > 1 else '')


def load_registry_file(path: str) -> List[Tuple[str, Quantity]]:
    """Lee un fichero de sobrescrituras del registro.

    Args:
        path: Ruta del fichero

    Returns:
        Lista de pares (símbolo, magnitud) en el orden del fichero
    """
    overrides = []
    try:
        lines = Path(path).read_text(encoding='utf-8').splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read registry file {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        try:
            parsed = parse_registry_line(line)
        except ConfigError as e:
            raise ConfigError(f"{path}:{lineno}: {e}") from e
        if parsed:
            overrides.append(parsed)
    logger.info(f"Loaded {len(overrides)} registry overrides from {path}")
    return overrides


def registry_from_sources(registry_file: Optional[str] = None,
                          overrides: Iterable[Tuple[str, Quantity]] = ()) -> ConstantRegistry:
    """Registro por defecto → fichero de entorno → fichero explícito → overrides."""
    collected: List[Tuple[str, Quantity]] = []
    env_file = os.getenv(REGISTRY_ENV_VAR)
    if env_file:
        collected.extend(load_registry_file(env_file))
    if registry_file:
        collected.extend(load_registry_file(registry_file))
    collected.extend(overrides)
    return build_registry(collected)
