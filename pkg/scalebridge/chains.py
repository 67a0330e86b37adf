"""
Cadenas de derivación: secuencias de pasos solve/evaluate que reproducen las
deducciones del catálogo (masa de Weinberg, constante de Planck a partir de
las fluctuaciones, partícula de Planck).

Cada paso guarda su valor intermedio; los pasos posteriores leen los
símbolos ya resueltos.
"""

import json
import logging
from collections import ChainMap
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple

import pandas as pd

from scalebridge.catalog import catalog_environment, quantity_to_dict
from scalebridge.dimensions import (
    CoincidenceVerdict,
    Quantity,
    coincide,
    format_display,
    log10_magnitude,
)
from scalebridge.errors import ConfigError, EvaluationError, UnknownSymbol
from scalebridge.expressions import evaluate, parse_expression
from scalebridge.relations import format_relation, parse_relation, solve_for

logger = logging.getLogger(__name__)


class StepDef(NamedTuple):
    name: str
    relation: str
    unknown: str
    store_as: str
    reference: Optional[str] = None


class CheckDef(NamedTuple):
    label: str
    value: str
    reference: str
    tol_decades: float


CHAINS: Dict[str, Tuple[List[StepDef], List[CheckDef]]] = {
    'weinberg': (
        [
            StepDef('weinberg mass', 'm_pi ~ (hbar^2*H/(G*c))^(1/3)', 'm_pi', 'm_weinberg', 'm_pi'),
            StepDef('length at weinberg mass', '@let(m=m_weinberg) L = hbar^2/(2*m^3*G)',
                     'L', 'L_weinberg', 'R'),
            StepDef('length at registry pion mass', '@let(m=m_pi) L = hbar^2/(2*m^3*G)',
                     'L', 'L_pion', 'R'),
        ],
        [
            CheckDef('weinberg mass vs m_pi', 'm_weinberg', 'm_pi', 1.0),
            CheckDef('length at weinberg mass vs R', 'L_weinberg', 'R', 1.0),
            CheckDef('length at pion mass vs R', 'L_pion', 'R', 2.0),
        ],
    ),
    'planck_constant': (
        [
            StepDef('compton length', 'hbar/m_pi ~ l*c', 'l', 'l', 'l'),
            StepDef('particle number', 'l ~ R/N^(1/2)', 'N', 'N', 'N'),
            StepDef('planck constant', 'hbar ~ G*N^(1/2)*m_pi^2/c', 'hbar', 'hbar_derived', 'hbar'),
            StepDef('fluctuation energy', 'dE = G*N^(1/2)*m_pi^2/R', 'dE', 'dE'),
            StepDef('fluctuation action', '@let(T_age=R/c) dE_T = dE*T_age', 'dE_T', 'dE_T', 'hbar'),
        ],
        [
            CheckDef('derived hbar vs hbar', 'hbar_derived', 'hbar', 1.5),
        ],
    ),
    'planck_particle': (
        [
            StepDef('planck length', '@let(m=m_P) L = hbar^2/(2*m^3*G)', 'L', 'L_planck', '1e-33*cm'),
            StepDef('planck energy', '@let(m=m_P, L=L_planck) E = G*m^2/L', 'E', 'E_planck', 'm_P*c^2'),
            StepDef('energy over rest energy', 'E_ratio = E_planck/(m_P*c^2)', 'E_ratio', 'E_ratio'),
        ],
        [
            CheckDef('planck length vs 1e-33 cm', 'L_planck', '1e-33*cm', 0.5),
            CheckDef('planck energy vs m_P c^2', 'E_planck', 'm_P*c^2', 0.5),
        ],
    ),
}


@dataclass(frozen=True)
class ChainStep:
    name: str
    symbol: str
    value: Quantity
    relation: str
    reference: Optional[Quantity] = None
    gap_decades: Optional[float] = None


@dataclass(frozen=True)
class ChainCheck:
    label: str
    value: Quantity
    reference: Quantity
    verdict: CoincidenceVerdict


@dataclass(frozen=True)
class ChainReport:
    name: str
    steps: List[ChainStep]
    checks: List[ChainCheck]

    @property
    def passed(self) -> bool:
        return all(check.verdict.passed for check in self.checks)

    def value(self, symbol: str) -> Quantity:
        for step in self.steps:
            if step.symbol == symbol:
                return step.value
        raise KeyError(symbol)


def _gap(value: Quantity, reference: Quantity) -> Optional[float]:
    if value.magnitude <= 0 or reference.magnitude <= 0:
        return None
    return log10_magnitude(value) - log10_magnitude(reference)


def run_chain(name: str, env: Mapping[str, Quantity]) -> ChainReport:
    """Ejecuta una cadena de derivación.

    Args:
        name: 'weinberg', 'planck_constant' o 'planck_particle'
        env: Registro de constantes

    Returns:
        Informe con cada paso intermedio y las comprobaciones finales

    Raises:
        ConfigError: Cadena desconocida
        NotIsolatable, UnknownSymbol: Desde los pasos, con el nombre del paso
    """
    if name not in CHAINS:
        raise ConfigError(f"Unknown chain '{name}', expected one of {sorted(CHAINS)}")
    step_defs, check_defs = CHAINS[name]
    solved: Dict[str, Quantity] = {}
    scope = ChainMap(solved, catalog_environment(env))

    steps = []
    for step_def in step_defs:
        rel = parse_relation(step_def.relation)
        try:
            value = solve_for(rel, step_def.unknown, scope)
            reference = evaluate(parse_expression(step_def.reference), scope) if step_def.reference else None
        except UnknownSymbol as e:
            raise UnknownSymbol(e.symbol, context=f"chain {name}, step '{step_def.name}'") from e
        except EvaluationError as e:
            raise type(e)(f"chain {name}, step '{step_def.name}': {e}") from e
        solved[step_def.store_as] = value
        gap = _gap(value, reference) if reference is not None else None
        steps.append(ChainStep(step_def.name, step_def.store_as, value, format_relation(rel), reference, gap))
        gap_text = f", gap {gap:+.3f} decades" if gap is not None else ''
        logger.info(f"[{name}] {step_def.name}: {step_def.store_as} = {value}{gap_text}")

    checks = []
    for check_def in check_defs:
        value = evaluate(parse_expression(check_def.value), scope)
        reference = evaluate(parse_expression(check_def.reference), scope)
        checks.append(ChainCheck(check_def.label, value, reference, coincide(value, reference, check_def.tol_decades)))
    return ChainReport(name, steps, checks)


def fluctuation_energy(env: Mapping[str, Quantity]) -> Tuple[Quantity, Quantity]:
    """Energía de fluctuación ΔE = G·√N·m_π²/R y su producto con T = R/c.

    Returns:
        (ΔE, ΔE·T); ΔE no depende de R y ΔE·T tiene dimensión de acción
    """
    try:
        energy = evaluate(parse_expression('G*N^(1/2)*m_pi^2/R'), env)
        duration = evaluate(parse_expression('R/c'), env)
    except UnknownSymbol as e:
        raise UnknownSymbol(e.symbol, context='fluctuation_energy') from e
    return energy, energy * duration


def chain_to_dict(report: ChainReport) -> Dict[str, Any]:
    return {
        'chain': report.name,
        'pass': report.passed,
        'steps': [
            {
                'name': step.name,
                'symbol': step.symbol,
                'value': quantity_to_dict(step.value),
                'relation': step.relation,
                'reference': quantity_to_dict(step.reference) if step.reference else None,
                'gap_decades': step.gap_decades,
            }
            for step in report.steps
        ],
        'checks': [
            {
                'label': check.label,
                'log10_ratio': check.verdict.log10_ratio,
                'tol_decades': check.verdict.tol_decades,
                'pass': check.verdict.passed,
            }
            for check in report.checks
        ],
    }


def chain_to_json(report: ChainReport) -> str:
    return json.dumps(chain_to_dict(report), indent=2, ensure_ascii=False)


def chain_to_table(report: ChainReport) -> str:
    steps = pd.DataFrame([
        {
            'step': step.name,
            'symbol': step.symbol,
            'value': format_display(step.value.magnitude),
            'dimension': str(step.value.dimension),
            'gap': '' if step.gap_decades is None else f"{step.gap_decades:+.3f}",
        }
        for step in report.steps
    ])
    checks = pd.DataFrame([
        {
            'check': check.label,
            'log10_ratio': f"{check.verdict.log10_ratio:+.4f}",
            'tol': f"{check.verdict.tol_decades:.3g}",
            'verdict': 'PASS' if check.verdict.passed else 'FAIL',
        }
        for check in report.checks
    ])
    return f"chain: {report.name}\n\n{steps.to_string(index=False)}\n\n{checks.to_string(index=False)}"
