"""
Catálogo de coincidencias entre la escala de Planck y la escala de Hubble.

Cada entrada es una relación anotada; ``run_catalog`` evalúa ambos lados con
el registro activo y produce un informe por filas.
"""

import json
import logging
from collections import ChainMap
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import pandas as pd

from scalebridge.dimensions import CoincidenceVerdict, Quantity, format_display, format_magnitude
from scalebridge.errors import ConfigError, EvaluationError, ScalebridgeError, UnknownSymbol
from scalebridge.expressions import evaluate, symbols
from scalebridge.registry import UNITS, ConstantRegistry, default_registry
from scalebridge.relations import (
    Relation,
    check_relation,
    format_relation,
    parse_relation,
    relation_environment,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    relation: Relation
    description: str = ''
    expected_log10_ratio: Optional[float] = None

    @property
    def name(self) -> str:
        return self.relation.name

    @property
    def paper_tag(self) -> str:
        return self.relation.paper_tag


# (línea del catálogo, descripción, log10(lhs/rhs) medido con el registro por defecto)
_BUILTIN_LINES = [
    ("@name(R1) @paper(schwarzschild-compton) @tol(decades=0.5) "
     "G*m_P/c^2 ~ hbar/(m_P*c)",
     "Schwarzschild radius of the Planck mass equals its Compton wavelength",
     -0.0002),
    ("@name(R2) @paper(planck-gravity-dominance) @tol(decades=2.5) "
     "G*m_P^2/e^2 ~ 1",
     "gravitational over electric energy at the Planck scale; evaluates to about 137",
     2.137),
    ("@name(R3) @paper(pion-gravity-ratio) @tol(decades=2.5) "
     "G*m_pi^2/e^2 ~ 1e-40",
     "gravity/electromagnetism ratio for the pion; evaluates to 1.8e-38, "
     "2.25 decades above the quoted 1e-40",
     2.253),
    ("@name(R4) @paper(self-gravitating-energy) @let(m=m_P, L=hbar^2/(2*m^3*G)) "
     "G*m^2/L = 2*m^5*G^2/hbar^2",
     "energy of the self-gravitating particle, identity once L is fixed",
     0.0),
    ("@name(R5_planck) @paper(self-gravitating-length) @tol(decades=0.5) "
     "@let(m=m_P, L_ref=1e-33*cm) hbar^2/(2*m^3*G) ~ L_ref",
     "self-gravitating length at the Planck mass against 1e-33 cm",
     -0.092),
    ("@name(R5_pion) @paper(self-gravitating-length) @tol(decades=2.0) "
     "@let(m=m_pi, L_ref=1e28*cm) hbar^2/(2*m^3*G) ~ L_ref",
     "self-gravitating length at the pion mass against 1e28 cm",
     -1.267),
    ("@name(R6) @paper(pion-gravitational-energy) @tol(decades=1.5) "
     "N*G*m_pi^2/R ~ m_pi*c^2",
     "gravitational energy of N pions against the pion rest energy (R used as the radius)",
     0.966),
    ("@name(R7) @paper(weinberg-mass) @tol(decades=1.0) "
     "m_pi ~ (hbar^2*H/(G*c))^(1/3)",
     "pion mass from the Hubble constant",
     0.362),
    ("@name(R8) @paper(uncertainty-length) @tol(decades=0.5) @defines(N) "
     "l ~ R/N^(1/2)",
     "statistical uncertainty length; defines N under the default registry",
     0.0),
    ("@name(R9) @paper(diffusion-length) @tol(decades=0.5) @defines(l) "
     "hbar/m_pi ~ l*c",
     "diffusion constant hbar/m against l*v with v = c; defines l under the default registry",
     0.0),
    ("@name(R10) @paper(fluctuation-planck-constant) @tol(decades=1.5) "
     "hbar ~ G*N^(1/2)*m_pi^2/c",
     "Planck constant from particle-number fluctuation",
     -0.966),
    ("@name(R11) @paper(universe-black-hole) @tol(decades=1.0) @defines(M) "
     "R ~ G*M/c^2",
     "the universe as a black hole of radius R; defines M under the default registry",
     0.0),
    ("@name(R12) @paper(zpf-rest-energy) @tol(decades=0.5) "
     "(hbar*c/l^4)*l^3 ~ m_pi*c^2",
     "background field energy inside a Compton volume against the rest energy",
     0.0),
]


def catalog_environment(registry: Mapping[str, Quantity]) -> Mapping[str, Quantity]:
    """Constantes del registro más las unidades (cm, g, s, ...)."""
    return ChainMap(registry, UNITS)


def relation_symbols(rel: Relation) -> set:
    """Símbolos que la relación necesita del entorno (sin los locales)."""
    needed = symbols(rel.lhs) | symbols(rel.rhs)
    bound = set()
    for symbol, expr in rel.bindings:
        needed |= symbols(expr) - bound
        bound.add(symbol)
    return needed - bound


def check_closure(entries: List[CatalogEntry], env: Mapping[str, Quantity]) -> None:
    """Comprueba que todos los símbolos del catálogo se resuelven.

    Raises:
        UnknownSymbol: Con el nombre de la primera entrada que falla
    """
    for entry in entries:
        for symbol in sorted(relation_symbols(entry.relation)):
            if symbol not in env:
                raise UnknownSymbol(symbol, context=f"catalog entry {entry.name}")


def is_homogeneous(entry: CatalogEntry, env: Mapping[str, Quantity]) -> bool:
    """Igualdad estructural de la dimensión de ambos lados."""
    scope = relation_environment(entry.relation, env)
    return evaluate(entry.relation.lhs, scope).dimension == evaluate(entry.relation.rhs, scope).dimension


def builtin_catalog() -> List[CatalogEntry]:
    """Devuelve las 13 filas del catálogo (R5 aparece dos veces).

    La homogeneidad dimensional de cada fila se verifica al construirlo; un
    fallo aquí es un defecto del catálogo.
    """
    entries = [
        CatalogEntry(parse_relation(line), description, expected)
        for line, description, expected in _BUILTIN_LINES
    ]
    env = catalog_environment(default_registry())
    check_closure(entries, env)
    for entry in entries:
        if not is_homogeneous(entry, env):
            raise RuntimeError(f"Built-in catalog entry {entry.name} is not dimensionally homogeneous")
    return entries


@dataclass(frozen=True)
class CoincidenceRow:
    name: str
    paper_tag: str
    lhs: Quantity
    rhs: Quantity
    verdict: CoincidenceVerdict
    definitional: bool = False

    @property
    def passed(self) -> bool:
        return self.verdict.passed


@dataclass(frozen=True)
class CoincidenceReport:
    rows: List[CoincidenceRow]
    registry_fingerprint: str

    @property
    def overall_pass(self) -> bool:
        """Pasa si ninguna fila no definicional falla."""
        return not self.live_failures

    @property
    def live_failures(self) -> List[CoincidenceRow]:
        """Filas no definicionales que fallan."""
        return [row for row in self.rows if not row.passed and not row.definitional]


def _evaluate_entry(entry: CatalogEntry, registry: ConstantRegistry,
                    tol_override: Optional[float]) -> CoincidenceRow:
    try:
        lhs, rhs, verdict = check_relation(entry.relation, catalog_environment(registry), tol_override)
    except UnknownSymbol as e:
        raise UnknownSymbol(e.symbol, context=f"catalog entry {entry.name}") from e
    except EvaluationError as e:
        raise type(e)(f"catalog entry {entry.name}: {e}") from e
    defines = entry.relation.defines
    row = CoincidenceRow(
        name=entry.name,
        paper_tag=entry.paper_tag,
        lhs=lhs,
        rhs=rhs,
        verdict=verdict,
        definitional=bool(defines and registry.is_derived(defines)),
    )
    logger.debug(f"{entry.name}: log10_ratio={verdict.log10_ratio:+.4f} pass={verdict.passed}")
    return row


def run_catalog(entries: List[CatalogEntry], env: Optional[ConstantRegistry] = None,
                tol_override: Optional[float] = None, workers: int = 1) -> CoincidenceReport:
    """Evalúa todas las entradas del catálogo.

    Args:
        entries: Entradas a evaluar
        env: Registro de constantes (por defecto, el registro por defecto)
        tol_override: Tolerancia en décadas que sustituye la de cada fila '~'
        workers: Hilos para evaluar filas; el orden del informe no cambia

    Returns:
        Informe con una fila por entrada, en el orden del catálogo
    """
    registry = env if env is not None else default_registry()
    if not entries:
        logger.warning("Empty catalog, nothing to check")
    if workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda e: _evaluate_entry(e, registry, tol_override), entries))
    else:
        rows = [_evaluate_entry(entry, registry, tol_override) for entry in entries]
    report = CoincidenceReport(rows=rows, registry_fingerprint=registry.fingerprint())
    logger.info(f"Catalog run finished: {sum(r.passed for r in rows)}/{len(rows)} rows pass")
    return report


def quantity_to_dict(q: Quantity) -> Dict[str, str]:
    return {'value': format_magnitude(q.magnitude), 'dimension': str(q.dimension)}


def report_to_dict(report: CoincidenceReport) -> Dict[str, Any]:
    return {
        'registry_fingerprint': report.registry_fingerprint,
        'overall_pass': report.overall_pass,
        'rows': [
            {
                'name': row.name,
                'paper_tag': row.paper_tag,
                'lhs': quantity_to_dict(row.lhs),
                'rhs': quantity_to_dict(row.rhs),
                'log10_ratio': row.verdict.log10_ratio,
                'tol_decades': row.verdict.tol_decades,
                'pass': row.passed,
                'definitional': row.definitional,
            }
            for row in report.rows
        ],
    }


def report_to_json(report: CoincidenceReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False)


def report_to_table(report: CoincidenceReport) -> str:
    """Tabla de ancho fijo para la terminal."""
    df = pd.DataFrame([
        {
            'name': row.name,
            'lhs': format_display(row.lhs.magnitude),
            'rhs': format_display(row.rhs.magnitude),
            'dimension': str(row.lhs.dimension),
            'log10_ratio': f"{row.verdict.log10_ratio:+.4f}",
            'tol': f"{row.verdict.tol_decades:.3g}",
            'verdict': ('PASS' if row.passed else 'FAIL') + (' (definitional)' if row.definitional else ''),
        }
        for row in report.rows
    ], columns=['name', 'lhs', 'rhs', 'dimension', 'log10_ratio', 'tol', 'verdict'])
    status = 'PASS' if report.overall_pass else 'FAIL'
    return (f"{df.to_string(index=False)}\n\n"
            f"overall: {status}  registry: {report.registry_fingerprint[:16]}")


def export_catalog(entries: List[CatalogEntry]) -> str:
    """Texto del fichero de catálogo: una relación por línea."""
    lines = ['# scalebridge catalog']
    lines.extend(format_relation(entry.relation) for entry in entries)
    return '\n'.join(lines) + '\n'


def parse_catalog(text: str) -> List[CatalogEntry]:
    """Lee el formato de ``export_catalog`` (comentarios con '#')."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        try:
            entries.append(CatalogEntry(parse_relation(line)))
        except ScalebridgeError as e:
            logger.error(f"Catalog line {lineno}: {e}")
            raise
    return entries


def load_catalog_file(path: str) -> List[CatalogEntry]:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f"Cannot read catalog file {path}: {e}") from e
    return parse_catalog(text)


def catalog_listing(entries: List[CatalogEntry]) -> List[Dict[str, Any]]:
    """Filas de ``catalog list``: nombre, etiqueta, relación y tolerancia."""
    return [
        {
            'name': entry.name,
            'paper_tag': entry.paper_tag,
            'relation': format_relation(entry.relation),
            'tol_decades': entry.relation.effective_tol_decades,
            'description': entry.description,
        }
        for entry in entries
    ]
