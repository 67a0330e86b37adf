"""
Escenarios de simulación: configuración JSON, validación y ejecución.

Claves admitidas (cualquier otra es un error de configuración):

    fixture             'harmonic' | 'free'
    n_points, dx        malla uniforme centrada en x_center
    x_center, sigma0    centro del paquete y anchura del paquete libre
    k0, omega           número de onda libre y frecuencia del oscilador
    hbar_sim, mass_sim  unidades de la simulación
    dt, t_end           paso de Crank-Nicolson y tiempo final
    sample_every        pasos de Crank-Nicolson por paso del conjunto
    n_paths, seed       tamaño y semilla del conjunto
    bandwidth           anchura del núcleo de densidad
    workers             hilos para los bloques de caminos
    brownian_dt         lista de pasos para la comprobación browniana
    dump_times          tiempos de los volcados x,rho,S,Vq,b
    max_l1              umbral de la discrepancia L1
    max_hj_residual     umbral del residuo de Hamilton-Jacobi consistente
    max_variance_error  umbral del error relativo de la varianza
    out_dir             directorio de salida
"""

import json
import math
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from scalebridge.errors import ConfigError
from scalebridge.ensemble import brownian_scaling_check, nelson_consistency
from scalebridge.models import field_table, save_to_csv
from scalebridge.utils import ensure_directory, field_dump_filename
from scalebridge.wavefunction import (
    GridGeometry,
    HJResidual,
    SimUnits,
    accuracy_guard,
    evolve_frames,
    harmonic_potential,
    hj_residual,
    init_wavepacket,
    zero_potential,
)

logger = logging.getLogger(__name__)

FIXTURES = ('harmonic', 'free')
BROWNIAN_VARIANCE_TOLERANCE = 0.02
BROWNIAN_MEAN_STD_ERRORS = 3.0
GUARD_WARNING_FRACTION = 0.8


@dataclass(frozen=True)
class Scenario:
    fixture: str = 'harmonic'
    n_points: int = 1024
    dx: float = 0.02
    x_center: float = 0.0
    sigma0: float = 1.0
    k0: float = 0.0
    omega: float = 1.0
    hbar_sim: float = 1.0
    mass_sim: float = 1.0
    dt: float = 1e-4
    t_end: float = 5.0
    sample_every: int = 10
    n_paths: int = 100_000
    seed: int = 42
    bandwidth: float = 0.1
    workers: int = 1
    brownian_dt: Tuple[float, ...] = (1e-3, 1e-2, 1e-1)
    dump_times: Tuple[float, ...] = ()
    max_l1: float = 0.03
    max_hj_residual: float = 1e-2
    max_variance_error: float = 0.03
    out_dir: str = 'simulation_output'

    @property
    def units(self) -> SimUnits:
        return SimUnits(self.hbar_sim, self.mass_sim)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry.centered(self.n_points, self.dx, self.x_center)

    @property
    def n_steps(self) -> int:
        """Pasos de Crank-Nicolson, redondeados a un múltiplo de sample_every."""
        intervals = max(1, round(self.t_end / (self.dt * self.sample_every)))
        return intervals * self.sample_every

    @property
    def packet_width(self) -> float:
        if self.fixture == 'harmonic':
            return math.sqrt(self.hbar_sim / (2.0 * self.mass_sim * self.omega))
        return self.sigma0

    def expected_variance(self, t: float) -> float:
        """Varianza analítica de |ψ|² en el tiempo t."""
        if self.fixture == 'harmonic':
            return self.packet_width ** 2
        spread = self.hbar_sim * t / (2.0 * self.mass_sim * self.sigma0 ** 2)
        return self.sigma0 ** 2 * (1.0 + spread ** 2)


FIXTURE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    'harmonic': {},
    'free': {'fixture': 'free', 'n_points': 1536, 'sigma0': 1.0, 't_end': 2.0, 'max_l1': 0.05},
}

SCENARIO_KEYS = frozenset(f.name for f in fields(Scenario))


def validate_scenario(scenario: Scenario) -> Scenario:
    """Comprueba la coherencia del escenario.

    Raises:
        ConfigError: Con el valor de la guarda si dt la supera, o con la
            clave inválida en cualquier otro caso
    """
    if scenario.fixture not in FIXTURES:
        raise ConfigError(f"Unknown fixture '{scenario.fixture}' (expected one of {', '.join(FIXTURES)})")
    positive = ('dx', 'dt', 't_end', 'bandwidth', 'hbar_sim', 'mass_sim', 'omega', 'sigma0',
                'max_l1', 'max_hj_residual', 'max_variance_error')
    for name in positive:
        value = getattr(scenario, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigError(f"Scenario key '{name}' must be a finite number > 0, got {value!r}")
    for name, minimum in (('n_points', 16), ('sample_every', 1), ('n_paths', 1), ('workers', 1)):
        value = getattr(scenario, name)
        if not isinstance(value, int) or value < minimum:
            raise ConfigError(f"Scenario key '{name}' must be an integer >= {minimum}, got {value!r}")
    guard = accuracy_guard(scenario.geometry, scenario.units)
    if scenario.dt > guard:
        raise ConfigError(f"dt={scenario.dt:g} exceeds the accuracy guard dx^2*m/hbar={guard:g}")
    if scenario.dt > GUARD_WARNING_FRACTION * guard:
        logger.warning(f"dt={scenario.dt:g} is close to the accuracy guard {guard:g}")
    if not scenario.packet_width > 4.0 * scenario.dx:
        raise ConfigError(f"Packet width {scenario.packet_width:g} is not resolved by dx={scenario.dx:g}")
    if scenario.bandwidth < scenario.dx:
        raise ConfigError(f"bandwidth={scenario.bandwidth:g} must be >= dx={scenario.dx:g}")
    if any(not (isinstance(dt, (int, float)) and dt > 0) for dt in scenario.brownian_dt):
        raise ConfigError(f"brownian_dt values must be > 0, got {list(scenario.brownian_dt)}")
    return scenario


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """Construye un escenario a partir de los valores por defecto de su fixture.

    Raises:
        ConfigError: Si hay claves desconocidas o valores inválidos
    """
    if not isinstance(data, dict):
        raise ConfigError("Scenario must be a JSON object")
    unknown = sorted(set(data) - SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"Unknown scenario keys: {', '.join(unknown)}")
    fixture = data.get('fixture', 'harmonic')
    if fixture not in FIXTURES:
        raise ConfigError(f"Unknown fixture '{fixture}' (expected one of {', '.join(FIXTURES)})")
    values = dict(FIXTURE_DEFAULTS[fixture])
    values.update(data)
    for name in ('brownian_dt', 'dump_times'):
        if name in values:
            if not isinstance(values[name], (list, tuple)):
                raise ConfigError(f"Scenario key '{name}' must be a list")
            values[name] = tuple(values[name])
    return validate_scenario(Scenario(**values))


def fixture_scenario(fixture: str, **overrides) -> Scenario:
    return scenario_from_dict({'fixture': fixture, **overrides})


def load_scenario(path) -> Scenario:
    """Carga un escenario desde un fichero JSON.

    Raises:
        ConfigError: Si el fichero no existe, no es JSON o no valida
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read scenario {path}: {e}") from e
    logger.debug(f"Loaded scenario from {path}")
    return scenario_from_dict(data)


@dataclass(frozen=True, eq=False)
class SimulationSummary:
    scenario: Scenario
    consistency: pd.DataFrame
    brownian: pd.DataFrame
    hj: HJResidual
    final_variance: float
    expected_variance: float
    files: List[Path] = field(default_factory=list)

    @property
    def final_l1(self) -> float:
        return float(self.consistency['l1_discrepancy'].iloc[-1])

    @property
    def max_l1(self) -> float:
        return float(self.consistency['l1_discrepancy'].max())

    @property
    def variance_error(self) -> float:
        return abs(self.final_variance / self.expected_variance - 1.0)

    @property
    def hj_consistent_residual(self) -> float:
        return min(self.hj.max_printed, self.hj.max_bohmian)

    @property
    def brownian_passed(self) -> bool:
        table = self.brownian
        variance_ok = (table['variance_ratio'] - 1.0).abs() <= BROWNIAN_VARIANCE_TOLERANCE
        mean_ok = table['mean_step'].abs() <= BROWNIAN_MEAN_STD_ERRORS * table['std_error']
        return bool((variance_ok & mean_ok).all())

    @property
    def checks(self) -> Dict[str, bool]:
        scenario = self.scenario
        return {
            'l1': self.max_l1 <= scenario.max_l1,
            'hj_residual': self.hj_consistent_residual <= scenario.max_hj_residual,
            'variance': self.variance_error <= scenario.max_variance_error,
            'brownian': self.brownian_passed,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def summary_to_dict(summary: SimulationSummary) -> Dict[str, Any]:
    return {
        'fixture': summary.scenario.fixture,
        'scenario': asdict(summary.scenario),
        'final_l1': summary.final_l1,
        'max_l1': summary.max_l1,
        'final_variance': summary.final_variance,
        'expected_variance': summary.expected_variance,
        'variance_error': summary.variance_error,
        'hj_residual': {
            'printed': summary.hj.max_printed,
            'bohmian': summary.hj.max_bohmian,
            'consistent': summary.hj.consistent,
        },
        'brownian': summary.brownian.to_dict(orient='records'),
        'checks': summary.checks,
        'pass': summary.passed,
        'files': [str(path) for path in summary.files],
    }


def summary_to_text(summary: SimulationSummary) -> str:
    lines = [
        f"fixture            {summary.scenario.fixture}",
        f"final L1           {summary.final_l1:.4f} (max {summary.max_l1:.4f}, threshold {summary.scenario.max_l1:g})",
        f"variance           {summary.final_variance:.6g} vs {summary.expected_variance:.6g} "
        f"(error {summary.variance_error:.4f})",
        f"HJ residual        printed={summary.hj.max_printed:.3e} bohmian={summary.hj.max_bohmian:.3e} "
        f"consistent={summary.hj.consistent}",
        "brownian steps",
        summary.brownian.to_string(index=False),
        f"result             {'PASS' if summary.passed else 'FAIL'}",
    ]
    return '\n'.join(lines)


def run_scenario(scenario: Scenario, out_dir: Optional[str] = None) -> SimulationSummary:
    """Ejecuta el escenario y escribe sus CSV.

    Escribe ``consistency.csv`` (t,x_mean,x_var,l1_discrepancy),
    ``brownian.csv``, un volcado de campos por cada tiempo de ``dump_times``
    y ``summary.json``.

    Args:
        scenario: Escenario validado
        out_dir: Directorio de salida (por defecto, ``scenario.out_dir``)

    Returns:
        SimulationSummary: Resultados y umbrales evaluados
    """
    scenario = validate_scenario(replace(scenario, out_dir=out_dir or scenario.out_dir))
    units = scenario.units
    geometry = scenario.geometry
    if scenario.fixture == 'harmonic':
        potential = harmonic_potential(geometry, units, scenario.omega, scenario.x_center)
        grid = init_wavepacket('harmonic_ground', geometry, units, x_center=scenario.x_center,
                               omega=scenario.omega)
    else:
        potential = zero_potential(geometry)
        grid = init_wavepacket('gaussian_free', geometry, units, sigma0=scenario.sigma0,
                               x_center=scenario.x_center, k0=scenario.k0)
    logger.info(f"Running '{scenario.fixture}' scenario: {scenario.n_steps} steps of dt={scenario.dt:g}, "
                f"{scenario.n_paths} paths, seed {scenario.seed}")

    try:
        run = nelson_consistency(grid, potential, scenario.dt, scenario.n_steps, scenario.n_paths,
                                 scenario.seed, scenario.bandwidth, scenario.sample_every,
                                 snapshot_times=scenario.dump_times, workers=scenario.workers)
        hj = hj_residual(evolve_frames(run.grid, potential, scenario.dt, 2), potential, units)
        brownian = brownian_scaling_check(units, scenario.brownian_dt, scenario.n_paths, scenario.seed)
    except Exception as e:
        logger.error(f"Simulation '{scenario.fixture}' failed: {e}")
        raise

    output = ensure_directory(scenario.out_dir)
    files = [output / 'consistency.csv', output / 'brownian.csv']
    save_to_csv(run.table, files[0])
    save_to_csv(brownian, files[1])
    for snapshot in run.snapshots:
        path = output / field_dump_filename(scenario.fixture, snapshot.time)
        save_to_csv(field_table(snapshot), path)
        files.append(path)

    _, final_variance = run.ensemble.moments()
    summary = SimulationSummary(scenario, run.table, brownian, hj, final_variance,
                                scenario.expected_variance(run.grid.time - grid.time), files)
    summary_path = output / 'summary.json'
    with open(summary_path, 'w', encoding='utf-8') as f:
        json.dump(summary_to_dict(summary), f, indent=2)
    files.append(summary_path)
    logger.info(f"Scenario '{scenario.fixture}' finished: {'PASS' if summary.passed else 'FAIL'}")
    return summary
