"""
Laboratorio numérico 1D para la mecánica estocástica: función de onda en
una malla uniforme, evolución de Crank-Nicolson en una caja de Dirichlet,
descomposición de Madelung, potencial cuántico, deriva de Nelson y residuo
de la ecuación de Hamilton-Jacobi cuántica.

Las rejillas y los campos son instantáneas inmutables (arrays de solo
lectura).
"""

import math
import logging
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_banded

from scalebridge.errors import (
    AccuracyGuardExceeded,
    BoundaryContamination,
    ConfigError,
    MaskEmpty,
    UnresolvedPacket,
)

logger = logging.getLogger(__name__)

MIN_POINTS = 16
RHO_FLOOR_FRACTION = 1e-12
BOUNDARY_FRACTION = 1e-6
PROBABILITY_REGION = 0.99

PacketKind = Literal['gaussian_free', 'harmonic_ground']


def _readonly(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SimUnits:
    """Unidades naturales de la simulación; ν = ħ/m es siempre derivado."""

    hbar_sim: float = 1.0
    mass_sim: float = 1.0

    def __post_init__(self):
        for name in ('hbar_sim', 'mass_sim'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be finite and > 0, got {value}")

    @property
    def nu(self) -> float:
        return self.hbar_sim / self.mass_sim


@dataclass(frozen=True)
class GridGeometry:
    x0: float
    dx: float
    n_points: int

    def __post_init__(self):
        if not self.dx > 0:
            raise ConfigError(f"dx must be > 0, got {self.dx}")
        if self.n_points < MIN_POINTS:
            raise ConfigError(f"n_points must be >= {MIN_POINTS}, got {self.n_points}")

    @classmethod
    def centered(cls, n_points: int, dx: float, center: float = 0.0) -> 'GridGeometry':
        """Malla alrededor de ``center``; el centro es el punto de índice n_points // 2."""
        return cls(center - dx * (n_points // 2), dx, n_points)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n_points)

    @property
    def x_max(self) -> float:
        return self.x0 + self.dx * (self.n_points - 1)


@dataclass(frozen=True, eq=False)
class FieldOnGrid:
    """Campo real con máscara (True donde el valor está definido)."""

    geometry: GridGeometry
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        mask = _readonly(self.mask, dtype=bool)
        if values.shape != (self.geometry.n_points,) or mask.shape != values.shape:
            raise ValueError("Field values and mask must match the grid size")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("Field values must be finite on the mask")
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'mask', mask)

    @classmethod
    def full(cls, geometry: GridGeometry, values) -> 'FieldOnGrid':
        return cls(geometry, values, np.ones(geometry.n_points, dtype=bool))


@dataclass(frozen=True, eq=False)
class WavefunctionGrid:
    geometry: GridGeometry
    amplitudes: np.ndarray
    time: float = 0.0
    units: SimUnits = SimUnits()

    def __post_init__(self):
        amplitudes = _readonly(self.amplitudes, dtype=complex)
        if amplitudes.shape != (self.geometry.n_points,):
            raise ValueError("Amplitudes must match the grid size")
        object.__setattr__(self, 'amplitudes', amplitudes)

    x0 = property(lambda self: self.geometry.x0)
    dx = property(lambda self: self.geometry.dx)
    n_points = property(lambda self: self.geometry.n_points)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        """Norma discreta Σ|ψ_j|²·dx."""
        return float(np.sum(self.density) * self.dx)

    def moments(self) -> Tuple[float, float]:
        """(⟨x⟩, varianza) de la densidad."""
        rho = self.density
        weight = np.sum(rho)
        x = self.geometry.x
        mean = float(np.sum(x * rho) / weight)
        return mean, float(np.sum((x - mean) ** 2 * rho) / weight)


def check_boundary(grid: WavefunctionGrid) -> None:
    """Comprueba que el paquete está lejos de los bordes de la caja.

    Raises:
        BoundaryContamination: Si |ψ| en un borde supera 1e-6 del pico
    """
    magnitude = np.abs(grid.amplitudes)
    limit = BOUNDARY_FRACTION * magnitude.max()
    if magnitude[0] >= limit or magnitude[-1] >= limit:
        raise BoundaryContamination(
            f"Edge amplitude {max(magnitude[0], magnitude[-1]):.3e} exceeds "
            f"{BOUNDARY_FRACTION:g} of peak at t={grid.time:.6g}")


def init_wavepacket(kind: PacketKind, geometry: GridGeometry, units: SimUnits = SimUnits(),
                    sigma0: float = 1.0, x_center: float = 0.0, k0: float = 0.0,
                    omega: float = 1.0) -> WavefunctionGrid:
    """Construye un paquete normalizado.

    Args:
        kind: 'gaussian_free' (exp(-(x-xc)²/4σ₀² + i·k₀·x)) o
            'harmonic_ground' (estado fundamental de V = ½mω²x²)
        geometry: Malla
        units: Unidades de la simulación
        sigma0: Anchura de la densidad del paquete libre
        x_center: Centro del paquete
        k0: Número de onda del paquete libre
        omega: Frecuencia del oscilador

    Raises:
        UnresolvedPacket: Si la anchura no supera 4·dx
        BoundaryContamination: Si el paquete toca los bordes
    """
    x = geometry.x
    if kind == 'gaussian_free':
        width = sigma0
        psi = np.exp(-(x - x_center) ** 2 / (4.0 * sigma0 ** 2) + 1j * k0 * x)
    elif kind == 'harmonic_ground':
        if not omega > 0:
            raise ConfigError(f"omega must be > 0, got {omega}")
        width = math.sqrt(units.hbar_sim / (2.0 * units.mass_sim * omega))
        psi = np.exp(-units.mass_sim * omega * (x - x_center) ** 2 / (2.0 * units.hbar_sim)).astype(complex)
    else:
        raise ConfigError(f"Unknown wavepacket kind '{kind}'")
    if not width > 4.0 * geometry.dx:
        raise UnresolvedPacket(f"Packet width {width:g} is not resolved by dx={geometry.dx:g} (needs > 4*dx)")
    if not geometry.x0 < x_center < geometry.x_max:
        raise BoundaryContamination(f"Packet center {x_center:g} lies outside the box")
    psi = psi / math.sqrt(np.sum(np.abs(psi) ** 2) * geometry.dx)
    grid = WavefunctionGrid(geometry, psi, 0.0, units)
    check_boundary(grid)
    return grid


def harmonic_potential(geometry: GridGeometry, units: SimUnits = SimUnits(),
                       omega: float = 1.0, x_center: float = 0.0) -> FieldOnGrid:
    return FieldOnGrid.full(geometry, 0.5 * units.mass_sim * omega ** 2 * (geometry.x - x_center) ** 2)


def zero_potential(geometry: GridGeometry) -> FieldOnGrid:
    return FieldOnGrid.full(geometry, np.zeros(geometry.n_points))


def accuracy_guard(geometry: GridGeometry, units: SimUnits) -> float:
    """Paso máximo dx²·m/ħ (heurística de precisión; CN es incondicionalmente estable)."""
    return geometry.dx ** 2 * units.mass_sim / units.hbar_sim


def cn_step(grid: WavefunctionGrid, potential: FieldOnGrid, dt: float) -> WavefunctionGrid:
    """Un paso de Crank-Nicolson de iħ∂ψ/∂t = [-ħ²/2m ∂² + V]ψ con ψ = 0 fuera de la caja.

    Raises:
        AccuracyGuardExceeded: Si dt supera dx²·m/ħ
        BoundaryContamination: Si tras el paso el paquete toca los bordes
    """
    units = grid.units
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    guard = accuracy_guard(grid.geometry, units)
    if dt > guard:
        raise AccuracyGuardExceeded(f"dt={dt:g} exceeds the accuracy guard dx^2*m/hbar={guard:g}")

    psi = grid.amplitudes
    kinetic = units.hbar_sim ** 2 / (2.0 * units.mass_sim * grid.dx ** 2)
    coeff = 1j * dt / (2.0 * units.hbar_sim)

    h_psi = (2.0 * kinetic + potential.values) * psi
    h_psi[1:] -= kinetic * psi[:-1]
    h_psi[:-1] -= kinetic * psi[1:]
    rhs = psi - coeff * h_psi

    banded = np.empty((3, grid.n_points), dtype=complex)
    banded[0, 1:] = -coeff * kinetic
    banded[1, :] = 1.0 + coeff * (2.0 * kinetic + potential.values)
    banded[2, :-1] = -coeff * kinetic
    banded[0, 0] = banded[2, -1] = 0.0
    new_psi = solve_banded((1, 1), banded, rhs, check_finite=False)

    result = WavefunctionGrid(grid.geometry, new_psi, grid.time + dt, units)
    check_boundary(result)
    return result


def evolve_frames(grid: WavefunctionGrid, potential: FieldOnGrid, dt: float,
                  n_steps: int, every: int = 1) -> List[WavefunctionGrid]:
    """Evoluciona ``n_steps`` pasos y guarda un fotograma cada ``every`` pasos
    (incluido el inicial)."""
    frames = [grid]
    for step in range(1, n_steps + 1):
        grid = cn_step(grid, potential, dt)
        if step % every == 0:
            frames.append(grid)
    logger.debug(f"Evolved {n_steps} steps to t={grid.time:.6g}, kept {len(frames)} frames")
    return frames


def density_floor_mask(rho: np.ndarray) -> np.ndarray:
    return rho >= RHO_FLOOR_FRACTION * rho.max()


def madelung(grid: WavefunctionGrid) -> Tuple[FieldOnGrid, FieldOnGrid]:
    """Descompone ψ = √ρ·e^{iS/ħ}.

    La fase se desenvuelve de izquierda a derecha (corrección de saltos de
    2π) sobre los puntos por encima del suelo de densidad; S queda
    enmascarada en el resto.
    """
    rho = grid.density
    mask = density_floor_mask(rho)
    phase = np.zeros(grid.n_points)
    indices = np.flatnonzero(mask)
    phase[indices] = np.unwrap(np.angle(grid.amplitudes[indices]))
    full = np.ones(grid.n_points, dtype=bool)
    return (FieldOnGrid(grid.geometry, rho, full),
            FieldOnGrid(grid.geometry, grid.units.hbar_sim * phase, mask))


def _interior_mask(mask: np.ndarray) -> np.ndarray:
    """Puntos cuyo estencil central de tres puntos está entero en la máscara."""
    interior = np.zeros_like(mask)
    interior[1:-1] = mask[1:-1] & mask[:-2] & mask[2:]
    return interior


def _central_difference(values: np.ndarray, dx: float) -> np.ndarray:
    diff = np.zeros_like(values)
    diff[1:-1] = (values[2:] - values[:-2]) / (2.0 * dx)
    return diff


def quantum_potential(rho: FieldOnGrid, units: SimUnits = SimUnits()) -> FieldOnGrid:
    """V_q = (ħ²/2m)·(∇²√ρ)/√ρ con diferencia central de segundo orden.

    Se enmascara bajo el suelo de densidad y en los extremos; nunca se usan
    estenciles laterales.
    """
    density = np.clip(rho.values, 0.0, None)
    amplitude = np.sqrt(density)
    mask = _interior_mask(density_floor_mask(density) & rho.mask)
    values = np.zeros_like(amplitude)
    inner = mask[1:-1]
    second = (amplitude[2:] - 2.0 * amplitude[1:-1] + amplitude[:-2]) / rho.geometry.dx ** 2
    scale = units.hbar_sim ** 2 / (2.0 * units.mass_sim)
    values[1:-1][inner] = scale * second[inner] / amplitude[1:-1][inner]
    return FieldOnGrid(rho.geometry, values, mask)


def nelson_drift(grid: WavefunctionGrid, units: SimUnits = None) -> FieldOnGrid:
    """Deriva hacia delante b = ∂S/∂x / m + (ħ/2m)·∂ln ρ/∂x.

    El primer término es la velocidad de corriente; el segundo, la velocidad
    osmótica que completa la deriva de Nelson.
    """
    units = units or grid.units
    rho, action = madelung(grid)
    mask = _interior_mask(action.mask)
    log_rho = np.zeros(grid.n_points)
    log_rho[action.mask] = np.log(rho.values[action.mask])
    current = _central_difference(action.values, grid.dx) / units.mass_sim
    osmotic = units.hbar_sim / (2.0 * units.mass_sim) * _central_difference(log_rho, grid.dx)
    values = np.where(mask, current + osmotic, 0.0)
    return FieldOnGrid(grid.geometry, values, mask)


def probability_region(rho: np.ndarray, fraction: float = PROBABILITY_REGION) -> np.ndarray:
    """Máscara de la región central que contiene ``fraction`` de la probabilidad."""
    cumulative = np.cumsum(rho) - 0.5 * rho
    cumulative = cumulative / np.sum(rho)
    tail = (1.0 - fraction) / 2.0
    return (cumulative >= tail) & (cumulative <= 1.0 - tail)


@dataclass(frozen=True, eq=False)
class HJResidual:
    """Residuo de la ecuación de Hamilton-Jacobi cuántica con ambos signos.

    ``printed``: término cuántico con el signo con que aparece en la ecuación
    citada (+V_q a la derecha); ``bohmian``: el término tratado como energía
    potencial adicional (-V_q).
    """

    printed: FieldOnGrid
    bohmian: FieldOnGrid
    max_printed: float
    max_bohmian: float

    @property
    def consistent(self) -> str:
        return 'printed' if self.max_printed <= self.max_bohmian else 'bohmian'


def hj_residual(frames: Sequence[WavefunctionGrid], potential: FieldOnGrid,
                units: SimUnits = None) -> HJResidual:
    """Evalúa ∂S/∂t + (∂S)²/2m + V ∓ V_q sobre la máscara común.

    La derivada temporal usa diferencias centrales entre fotogramas vecinos
    (a partir de la fase de ψ_{k+1}·conj(ψ_{k-1})); los términos espaciales, las
    diferencias centrales del fotograma central. Las normas máximas se toman
    sobre la región del 99% de probabilidad de todos los fotogramas interiores.

    Args:
        frames: Al menos 3 fotogramas equiespaciados sobre la misma malla
        potential: Potencial externo V
        units: Unidades (por defecto, las del primer fotograma)

    Raises:
        MaskEmpty: Si el suelo de densidad deja vacío el dominio
    """
    if len(frames) < 3:
        raise ValueError(f"hj_residual needs at least 3 frames, got {len(frames)}")
    geometry = frames[0].geometry
    if any(frame.geometry != geometry for frame in frames):
        raise ValueError("All frames must share the same grid geometry")
    spacing = np.diff([frame.time for frame in frames])
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0) or spacing[0] <= 0:
        raise ValueError("Frames must be uniformly spaced in time")
    units = units or frames[0].units
    frame_dt = float(spacing[0])

    fields = {}
    max_norms = {'printed': 0.0, 'bohmian': 0.0}
    any_point = False
    middle = len(frames) // 2
    for k in range(1, len(frames) - 1):
        before, frame, after = frames[k - 1], frames[k], frames[k + 1]
        rho, action = madelung(frame)
        vq = quantum_potential(rho, units)
        step_phase = np.angle(after.amplitudes * np.conj(before.amplitudes))
        s_t = units.hbar_sim * step_phase / (2.0 * frame_dt)
        s_x = _central_difference(action.values, frame.dx)

        mask = (_interior_mask(action.mask) & vq.mask & potential.mask
                & density_floor_mask(before.density) & density_floor_mask(after.density))
        region = mask & probability_region(rho.values)
        base = s_t + s_x ** 2 / (2.0 * units.mass_sim) + potential.values
        for name, sign in (('printed', 1.0), ('bohmian', -1.0)):
            residual = np.where(mask, base - sign * vq.values, 0.0)
            if np.any(region):
                max_norms[name] = max(max_norms[name], float(np.max(np.abs(residual[region]))))
            if k == middle:
                fields[name] = FieldOnGrid(geometry, residual, mask)
        any_point = any_point or bool(np.any(region))
    if not any_point:
        raise MaskEmpty("Density floor left no points to evaluate the residual")
    result = HJResidual(fields['printed'], fields['bohmian'], max_norms['printed'], max_norms['bohmian'])
    logger.info(f"HJ residual: printed={result.max_printed:.3e} bohmian={result.max_bohmian:.3e} "
                f"-> consistent convention: {result.consistent}")
    return result
