"""
Conjunto browniano de Nelson: muestreo inicial, evolución de
Euler-Maruyama con deriva tomada de la función de onda, estimación de
densidad y comprobaciones de escalado y de consistencia.

Los números aleatorios salen de flujos Philox direccionados por contador:
los caminos se agrupan en bloques fijos y las normales del bloque ``b`` en
el paso ``k`` dependen solo de (semilla, k, b). Así el resultado es idéntico
con cualquier número de hilos.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.signal import convolve

from scalebridge.errors import BandwidthTooSmall, ConfigError, DriftUnavailable
from scalebridge.wavefunction import (
    FieldOnGrid,
    GridGeometry,
    SimUnits,
    WavefunctionGrid,
    cn_step,
    nelson_drift,
)

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
KERNEL_WIDTH = 5.0

# Primera palabra del contador Philox: separa el muestreo inicial de los pasos
_STEP_STREAM = 0
_SAMPLE_STREAM = 1

DriftSource = Callable[[float], FieldOnGrid]


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Posiciones del conjunto; ``rng_descriptor`` es (semilla, pasos consumidos)."""

    positions: np.ndarray
    time: float
    units: SimUnits
    rng_descriptor: Tuple[int, int]

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float, copy=True)
        if positions.ndim != 1 or positions.size < 1:
            raise ConfigError("An ensemble needs at least one path")
        if not np.all(np.isfinite(positions)):
            raise ValueError("Ensemble positions must be finite")
        positions.setflags(write=False)
        object.__setattr__(self, 'positions', positions)

    @property
    def n_paths(self) -> int:
        return self.positions.size

    @property
    def seed(self) -> int:
        return self.rng_descriptor[0]

    def moments(self) -> Tuple[float, float]:
        return float(np.mean(self.positions)), float(np.var(self.positions))


def block_generator(seed: int, stream: int, step: int, block: int) -> np.random.Generator:
    """Generador del bloque ``block`` en el paso ``step`` de un flujo."""
    counter = np.array([stream, 0, step, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def block_normals(seed: int, step: int, block: int, size: int = BLOCK_SIZE) -> np.ndarray:
    """Normales estándar de un bloque; siempre se genera el bloque completo."""
    return block_generator(seed, _STEP_STREAM, step, block).standard_normal(BLOCK_SIZE)[:size]


def _blocks(n_paths: int) -> List[slice]:
    return [slice(start, min(start + BLOCK_SIZE, n_paths)) for start in range(0, n_paths, BLOCK_SIZE)]


def _map_blocks(function, blocks: Sequence[slice], workers: int) -> list:
    if workers <= 1 or len(blocks) == 1:
        return [function(index, block) for index, block in enumerate(blocks)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, range(len(blocks)), blocks))


def sample_ensemble(grid: WavefunctionGrid, n_paths: int, seed: int) -> EnsembleState:
    """Muestrea ρ = |ψ|² por CDF inversa sobre las celdas de la malla.

    Args:
        grid: Función de onda inicial
        n_paths: Número de caminos (≥ 1)
        seed: Semilla raíz

    Returns:
        EnsembleState: Conjunto en el tiempo de ``grid`` con el contador a cero
    """
    if n_paths < 1:
        raise ConfigError(f"n_paths must be >= 1, got {n_paths}")
    rho = grid.density
    edges = grid.x0 - 0.5 * grid.dx + grid.dx * np.arange(grid.n_points + 1)
    cdf = np.concatenate(([0.0], np.cumsum(rho)))
    cdf /= cdf[-1]

    def draw(index: int, block: slice) -> np.ndarray:
        size = block.stop - block.start
        uniforms = block_generator(seed, _SAMPLE_STREAM, 0, index).random(BLOCK_SIZE)[:size]
        return np.interp(uniforms, cdf, edges)

    positions = np.concatenate(_map_blocks(draw, _blocks(n_paths), workers=1))
    logger.debug(f"Sampled {n_paths} paths from |psi|^2 with seed {seed}")
    return EnsembleState(positions, grid.time, grid.units, (seed, 0))


def frame_drift(frames: Sequence[WavefunctionGrid]) -> DriftSource:
    """Proveedor de deriva desde fotogramas de la función de onda.

    Devuelve la deriva de Nelson del fotograma más reciente con tiempo ≤ t;
    fuera del rango de los fotogramas no hay deriva.
    """
    times = np.array([frame.time for frame in frames])
    cache = {}

    def provider(t: float) -> FieldOnGrid:
        tolerance = 1e-9 * max(1.0, abs(t))
        if t < times[0] - tolerance or t > times[-1] + tolerance:
            raise DriftUnavailable(f"t={t:.6g} outside frame range [{times[0]:.6g}, {times[-1]:.6g}]")
        index = int(np.searchsorted(times, t + tolerance, side='right')) - 1
        if index not in cache:
            cache[index] = nelson_drift(frames[index])
        return cache[index]
    return provider


def _reflect(positions: np.ndarray, lower: float, upper: float) -> np.ndarray:
    positions = np.where(positions < lower, 2.0 * lower - positions, positions)
    positions = np.where(positions > upper, 2.0 * upper - positions, positions)
    return np.clip(positions, lower, upper)


def _drift_at(field: FieldOnGrid, positions: np.ndarray) -> np.ndarray:
    if not np.any(field.mask):
        raise DriftUnavailable("Drift field has no defined values")
    x = field.geometry.x
    return np.interp(positions, x[field.mask], field.values[field.mask])


def evolve_ensemble(ens: EnsembleState, drift_source: DriftSource, units: SimUnits,
                    dt: float, n_steps: int, workers: int = 1) -> EnsembleState:
    """Avanza el conjunto con x ← x + b(x,t)·dt + √(ν·dt)·ξ.

    La deriva en cada camino se interpola linealmente del campo; los bordes
    de la caja del campo reflejan.

    Args:
        ens: Estado inicial
        drift_source: Función t -> FieldOnGrid
        units: Unidades (ν = ħ/m)
        dt: Paso de tiempo
        n_steps: Número de pasos
        workers: Hilos para los bloques de caminos

    Raises:
        DriftUnavailable: Si el proveedor no cubre algún tiempo del paso
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    seed, counter = ens.rng_descriptor
    scale = math.sqrt(units.nu * dt)
    fields = [drift_source(ens.time + step * dt) for step in range(n_steps)]

    def advance(index: int, block: slice) -> np.ndarray:
        positions = np.array(ens.positions[block])
        for step, field in enumerate(fields):
            geometry = field.geometry
            noise = block_normals(seed, counter + step, index, positions.size)
            positions = positions + _drift_at(field, positions) * dt + scale * noise
            positions = _reflect(positions, geometry.x0, geometry.x_max)
        return positions

    positions = np.concatenate(_map_blocks(advance, _blocks(ens.n_paths), workers))
    return EnsembleState(positions, ens.time + n_steps * dt, units, (seed, counter + n_steps))


def density_estimate(ens: EnsembleState, geometry: GridGeometry, bandwidth: float) -> FieldOnGrid:
    """Densidad por núcleo gaussiano sobre la malla.

    Las posiciones se reparten linealmente entre los dos puntos vecinos y el
    histograma se convoluciona con el núcleo muestreado; el resultado se
    normaliza a Σρ̂·dx = 1.

    Raises:
        BandwidthTooSmall: Si bandwidth < dx
    """
    if bandwidth < geometry.dx:
        raise BandwidthTooSmall(f"Bandwidth {bandwidth:g} is below the grid spacing {geometry.dx:g}")
    n = geometry.n_points
    position = (np.asarray(ens.positions) - geometry.x0) / geometry.dx
    position = position[(position >= 0) & (position <= n - 1)]
    left = np.minimum(np.floor(position).astype(int), n - 2)
    weight = position - left
    counts = (np.bincount(left, weights=1.0 - weight, minlength=n)
              + np.bincount(left + 1, weights=weight, minlength=n))

    half_width = min(n - 1, int(math.ceil(KERNEL_WIDTH * bandwidth / geometry.dx)))
    offsets = geometry.dx * np.arange(-half_width, half_width + 1)
    kernel = np.exp(-0.5 * (offsets / bandwidth) ** 2)
    density = np.clip(convolve(counts, kernel, mode='same'), 0.0, None)
    total = np.sum(density) * geometry.dx
    if total > 0:
        density = density / total
    return FieldOnGrid.full(geometry, density)


def l1_distance(estimate: FieldOnGrid, rho: np.ndarray) -> float:
    return float(np.sum(np.abs(estimate.values - rho)) * estimate.geometry.dx)


def brownian_scaling_check(units: SimUnits, dt_list: Sequence[float], n_paths: int,
                           seed: int) -> pd.DataFrame:
    """Estadística de pasos brownianos puros (b = 0) para cada dt.

    Returns:
        pd.DataFrame: Columnas dt, rms_step, prediction (√(ν·dt)), ratio,
        mean_step, std_error, variance_ratio
    """
    rows = []
    for index, dt in enumerate(dt_list):
        if not dt > 0:
            raise ConfigError(f"Brownian dt values must be > 0, got {dt}")
        scale = math.sqrt(units.nu * dt)
        steps = np.concatenate([
            scale * block_normals(seed, index, block_index, block.stop - block.start)
            for block_index, block in enumerate(_blocks(n_paths))
        ])
        rms = float(np.sqrt(np.mean(steps ** 2)))
        rows.append({
            'dt': dt,
            'rms_step': rms,
            'prediction': scale,
            'ratio': rms / scale,
            'mean_step': float(np.mean(steps)),
            'std_error': scale / math.sqrt(n_paths),
            'variance_ratio': float(np.var(steps)) / (units.nu * dt),
        })
    table = pd.DataFrame(rows, columns=['dt', 'rms_step', 'prediction', 'ratio',
                                        'mean_step', 'std_error', 'variance_ratio'])
    logger.debug(f"Brownian scaling table:\n{table.to_string(index=False)}")
    return table


@dataclass(frozen=True, eq=False)
class ConsistencyRun:
    """Resultado de la coevolución: tabla de discrepancias y estados finales."""

    table: pd.DataFrame
    grid: WavefunctionGrid
    ensemble: EnsembleState
    snapshots: Tuple[WavefunctionGrid, ...] = ()


def nelson_consistency(grid: WavefunctionGrid, potential: FieldOnGrid, dt: float, n_steps: int,
                       n_paths: int, seed: int, bandwidth: float = 0.1, sample_every: int = 10,
                       report_times: Optional[Sequence[float]] = None,
                       snapshot_times: Sequence[float] = (), workers: int = 1) -> ConsistencyRun:
    """Coevoluciona la función de onda de referencia y el conjunto de Nelson.

    La función de onda avanza con Crank-Nicolson a paso ``dt``; el conjunto
    avanza a paso ``dt·sample_every`` con la deriva del último fotograma.
    En cada tiempo de informe se registran los momentos del conjunto y la
    distancia L1 entre la densidad estimada y |ψ|².

    Args:
        grid: Función de onda inicial
        potential: Potencial externo
        dt: Paso de Crank-Nicolson
        n_steps: Pasos de Crank-Nicolson (múltiplo de sample_every)
        n_paths: Caminos del conjunto
        seed: Semilla raíz
        bandwidth: Anchura del núcleo de densidad
        sample_every: Pasos de Crank-Nicolson por paso del conjunto
        report_times: Tiempos de informe (por defecto, ~50 equiespaciados)
        snapshot_times: Tiempos en los que guardar la función de onda
        workers: Hilos para el conjunto

    Returns:
        ConsistencyRun: Tabla con columnas t, x_mean, x_var, l1_discrepancy
    """
    if sample_every < 1 or n_steps % sample_every:
        raise ConfigError(f"n_steps={n_steps} must be a positive multiple of sample_every={sample_every}")
    n_intervals = n_steps // sample_every
    ensemble_dt = dt * sample_every
    interval_times = grid.time + ensemble_dt * np.arange(n_intervals + 1)

    def nearest_intervals(times: Sequence[float]) -> set:
        return {int(np.argmin(np.abs(interval_times - t))) for t in times}

    if report_times is None:
        report_every = max(1, n_intervals // 50)
        reports = set(range(0, n_intervals + 1, report_every)) | {n_intervals}
    else:
        reports = nearest_intervals(report_times)
    snapshots_at = nearest_intervals(snapshot_times)

    ensemble = sample_ensemble(grid, n_paths, seed)
    rows, snapshots = [], []
    for interval in range(n_intervals + 1):
        if interval in reports:
            estimate = density_estimate(ensemble, grid.geometry, bandwidth)
            x_mean, x_var = ensemble.moments()
            rows.append({'t': grid.time, 'x_mean': x_mean, 'x_var': x_var,
                         'l1_discrepancy': l1_distance(estimate, grid.density)})
            logger.debug(f"t={grid.time:.4f} L1={rows[-1]['l1_discrepancy']:.4f}")
        if interval in snapshots_at:
            snapshots.append(grid)
        if interval == n_intervals:
            break
        ensemble = evolve_ensemble(ensemble, frame_drift([grid]), grid.units, ensemble_dt, 1, workers)
        for _ in range(sample_every):
            grid = cn_step(grid, potential, dt)

    table = pd.DataFrame(rows, columns=['t', 'x_mean', 'x_var', 'l1_discrepancy'])
    logger.info(f"Nelson consistency: {n_paths} paths to t={grid.time:.4g}, "
                f"max L1={table['l1_discrepancy'].max():.4f}")
    return ConsistencyRun(table, grid, ensemble, tuple(snapshots))
