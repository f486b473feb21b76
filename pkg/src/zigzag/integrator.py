"""Adaptive Runge-Kutta-Fehlberg 4(5) integration of the truncated lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import MIN_SITES, DimensionlessParams, LatticeState

__all__ = [
    "EdgeReport",
    "IntegrationError",
    "IntegratorConfig",
    "Trajectory",
    "edge_monitor",
    "integrate",
    "rhs",
]


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite amplitude during integration."""


# Fehlberg 4(5) tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_BERR = _B5 - _B4


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, step bounds and the sample grid for :func:`integrate`."""

    z_grid: np.ndarray
    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float | None = None
    hmax: float = math.inf
    safety: float = 0.9
    min_factor: float = 0.2
    max_factor: float = 5.0
    max_steps: int = 10_000_000

    def __post_init__(self):
        z = np.asarray(self.z_grid, dtype=float)
        if z.ndim != 1 or z.size < 1:
            raise ValueError("z_grid must be a non-empty 1-d sequence")
        if z[0] != 0.0:
            raise ValueError("z_grid must start at 0")
        if np.any(np.diff(z) <= 0):
            raise ValueError("z_grid must be strictly increasing")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if self.hmax <= 0 or (self.h0 is not None and self.h0 <= 0):
            raise ValueError("step bounds must be positive")
        z.setflags(write=False)
        object.__setattr__(self, "z_grid", z)

    @classmethod
    def uniform(cls, z_max: float, samples: int, **kwargs) -> "IntegratorConfig":
        return cls(np.linspace(0.0, z_max, samples), **kwargs)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0
    # accepted local error estimates (2-norm, absolute), each earlier
    # contribution scaled by the norm growth (never shrinkage) since
    error_estimate: float = 0.0


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution; row ``i`` of ``amplitudes`` is the state at ``z[i]``."""

    params: DimensionlessParams
    z: np.ndarray
    amplitudes: np.ndarray
    stats: StepStats = field(default_factory=StepStats)

    @property
    def states(self) -> list[LatticeState]:
        return [LatticeState(z, row) for z, row in zip(self.z, self.amplitudes)]

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def n_sites(self) -> int:
        return self.amplitudes.shape[1]


def rhs(psi: np.ndarray, params: DimensionlessParams) -> np.ndarray:
    """``dPsi/dZ`` of the coupled-mode equations, O(N) and banded.

    Sites outside ``0..N-1`` are treated as zero.
    """
    psi = np.asarray(psi, dtype=complex)
    N = psi.size
    n = np.arange(N, dtype=float)
    acc = params.lam * n * psi
    s1 = np.sqrt(n[1:])
    s2 = np.sqrt(n[2:] * (n[2:] - 1))
    acc[1:] += params.alpha_minus * s1 * psi[:-1]
    acc[:-1] += params.alpha_plus * s1 * psi[1:]
    acc[2:] += params.beta * s2 * psi[:-2]
    acc[:-2] += params.beta * s2 * psi[2:]
    return 1j * acc


class _BandedRHS:
    # precomputed stencil weights for the hot loop
    def __init__(self, params: DimensionlessParams, N: int):
        n = np.arange(N, dtype=float)
        s1 = np.sqrt(n[1:])
        s2 = np.sqrt(n[2:] * (n[2:] - 1))
        self.diag = 1j * params.lam * n
        self.lo1 = 1j * params.alpha_minus * s1
        self.up1 = 1j * params.alpha_plus * s1
        self.off2 = 1j * params.beta * s2
        self.evals = 0

    def __call__(self, psi):
        self.evals += 1
        out = self.diag * psi
        out[1:] += self.lo1 * psi[:-1]
        out[:-1] += self.up1 * psi[1:]
        out[2:] += self.off2 * psi[:-2]
        out[:-2] += self.off2 * psi[2:]
        return out


def _initial_step(f, y, f0, rtol, atol):
    # Hairer-Norsett-Wanner starting-step heuristic, order 4
    scale = atol + rtol * np.abs(y)
    d0 = np.max(np.abs(y) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(y + h * f0)
    d2 = np.max(np.abs(f1 - f0) / scale) / h
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h, h1)


def integrate(initial: LatticeState | np.ndarray, params: DimensionlessParams,
              cfg: IntegratorConfig) -> Trajectory:
    """Integrate from ``Z = 0`` and sample the state on ``cfg.z_grid``.

    Steps are clipped so that every grid point is hit exactly; no
    interpolation is performed.  The order-4 solution is propagated, the
    order-5 solution only supplies the local error estimate.

    Raises
    ------
    IntegrationError
        If the step size underflows or an amplitude becomes non-finite.
    """
    if isinstance(initial, LatticeState):
        if initial.Z != 0.0:
            raise ValueError("initial state must sit at Z = 0")
        y = initial.amplitudes.astype(complex)
    else:
        y = np.array(initial, dtype=complex)
    if y.ndim != 1 or y.size < MIN_SITES:
        raise ValueError(f"need at least {MIN_SITES} sites")

    grid = cfg.z_grid
    f = _BandedRHS(params, y.size)
    stats = StepStats()
    out = np.empty((grid.size, y.size), dtype=complex)
    out[0] = y

    if not np.any(y):
        out[:] = 0.0
        return Trajectory(params, grid, out, stats)

    k = np.empty((6, y.size), dtype=complex)
    z = 0.0
    k[0] = f(y)
    h = cfg.h0 if cfg.h0 is not None else _initial_step(f, y, k[0], cfg.rtol, cfg.atol)
    h = min(h, cfg.hmax)
    steps = 0

    for i in range(1, grid.size):
        target = grid[i]
        while z < target:
            steps += 1
            if steps > cfg.max_steps:
                raise IntegrationError(f"exceeded {cfg.max_steps} steps at Z={z}")
            remaining = target - z
            landing = h >= remaining
            step = remaining if landing else h
            if step <= 16 * np.spacing(max(abs(z), 1.0)) and not landing:
                raise IntegrationError(f"step size underflow (h={step:g}) at Z={z}")

            for s in range(1, 6):
                incr = np.tensordot(_A[s], k[:s], axes=1)
                k[s] = f(y + step * incr)
            y4 = y + step * np.tensordot(_B4, k, axes=1)
            delta = step * np.tensordot(_BERR, k, axes=1)
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y4))
            err = float(np.max(np.abs(delta) / scale))

            if not math.isfinite(err):
                raise IntegrationError(f"non-finite amplitude near Z={z}")

            if err <= 1.0:
                z = target if landing else z + step
                growth = max(1.0, np.linalg.norm(y4) / np.linalg.norm(y))
                y = y4
                stats.accepted += 1
                stats.error_estimate = stats.error_estimate * growth + float(np.linalg.norm(delta))
                k[0] = f(y)
                if not np.all(np.isfinite(y)):
                    raise IntegrationError(f"non-finite amplitude at Z={z}")
                factor = cfg.max_factor if err == 0 else min(
                    cfg.max_factor, max(cfg.min_factor, cfg.safety * err ** -0.2))
                # a clipped landing step says nothing about the natural step size
                h = min(cfg.hmax, max(h, step * factor) if landing else step * factor)
            else:
                stats.rejected += 1
                h = step * max(cfg.min_factor, cfg.safety * err ** -0.2)
                if h <= 16 * np.spacing(max(abs(z), 1.0)):
                    raise IntegrationError(f"step size underflow (h={h:g}) at Z={z}")
        out[i] = y

    stats.rhs_evals = f.evals
    out.setflags(write=False)
    return Trajectory(params, grid, out, stats)


@dataclass(frozen=True)
class EdgeReport:
    flagged: bool
    worst_ratio: float
    ratios: np.ndarray


def edge_monitor(traj: Trajectory, threshold: float = 1e-8) -> EdgeReport:
    """Check whether light reaches the two outermost sites of the truncation.

    The per-sample ratio is ``(|Psi_{N-1}|^2 + |Psi_{N-2}|^2) / max_m |Psi_m|^2``.
    """
    intensity = traj.intensity
    peak = intensity.max(axis=1)
    edge = intensity[:, -1] + intensity[:, -2]
    ratios = np.divide(edge, peak, out=np.zeros_like(edge), where=peak > 0)
    worst = float(ratios.max()) if ratios.size else 0.0
    return EdgeReport(worst > threshold, worst, ratios)
