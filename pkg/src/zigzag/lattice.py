"""Model parameters, coupling coefficients and the truncated lattice Hamiltonian.

The coupled-mode equations for the zigzag Glauber-Fock lattice are written as
``i dPsi/dZ = H Psi`` with

    H = -[lam a^dag a + alpha_minus a^dag + alpha_plus a + beta (a^dag^2 + a^2)]

acting on the site basis ``|n>``, ``n = 0, 1, 2, ...``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_SITES",
    "EPS_GAMMA",
    "MIN_SITES",
    "DimensionlessParams",
    "HyperbolicRegimeError",
    "LatticeState",
    "PhysicalParams",
    "TruncatedHamiltonian",
    "UnitError",
    "bloch_period",
    "build_hamiltonian",
    "coupling_first",
    "coupling_second",
    "nondimensionalize",
]

MIN_SITES = 5
DEFAULT_SITES = 60
# |4 beta^2 - lam^2| at or below this is treated as the degenerate |lam| = 2 beta case.
EPS_GAMMA = 1e-9

# factor that converts a rate given in the keyed unit to 1/cm
_RATE_UNITS = {"1/cm": 1.0, "1/mm": 10.0, "1/m": 0.01}


class UnitError(ValueError):
    """Raised for an unknown or inconsistent unit tag."""


class HyperbolicRegimeError(ValueError):
    """Raised when lam^2 <= 4 beta^2, so there is no oscillatory (Bloch) regime."""


def _to_per_cm(value: float, unit: str, name: str) -> float:
    try:
        return float(value) * _RATE_UNITS[unit]
    except KeyError:
        raise UnitError(
            f"{name}: unknown unit {unit!r}, expected one of {sorted(_RATE_UNITS)}"
        ) from None


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional description of the waveguide array.

    Rates (``C``, ``alpha0``, ``mu``) are stored as given together with their
    unit tags and converted to 1/cm on demand.  Distances are in micrometres;
    ``d1``, ``d2`` only shift the coupling-distance law and cancel in every
    coupling coefficient.
    """

    C: float
    alpha0: float
    alpha_plus: float
    alpha_minus: float
    beta: float
    mu: float = 0.0
    d1: float = 0.0
    d2: float = 0.0
    kappa: float = 1.0
    C_unit: str = "1/cm"
    alpha0_unit: str = "1/cm"
    mu_unit: str = "1/cm"

    def __post_init__(self):
        for name in ("C", "alpha0", "mu", "d1", "d2", "kappa",
                     "alpha_plus", "alpha_minus", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.C_per_cm <= 0:
            raise ValueError("reference coupling C must be positive")
        # validates the remaining tags eagerly
        self.alpha0_per_cm, self.mu_per_cm

    @property
    def C_per_cm(self) -> float:
        return _to_per_cm(self.C, self.C_unit, "C")

    @property
    def alpha0_per_cm(self) -> float:
        return _to_per_cm(self.alpha0, self.alpha0_unit, "alpha0")

    @property
    def mu_per_cm(self) -> float:
        return _to_per_cm(self.mu, self.mu_unit, "mu")


@dataclass(frozen=True)
class DimensionlessParams:
    """The four real constants of the dimensionless coupled-mode equations."""

    lam: float
    alpha_plus: float
    alpha_minus: float
    beta: float

    def __post_init__(self):
        for name in ("lam", "alpha_plus", "alpha_minus", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def gamma_sq(self) -> float:
        """``4 beta^2 - lam^2``."""
        return 4.0 * self.beta**2 - self.lam**2

    @property
    def is_hermitian(self) -> bool:
        return self.alpha_plus == self.alpha_minus


@dataclass(frozen=True)
class LatticeState:
    """Field amplitudes ``Psi_0 .. Psi_{N-1}`` at propagation distance ``Z``.

    ``flags`` optionally marks sites whose value came from a truncated series.
    """

    Z: float
    amplitudes: np.ndarray
    flags: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size < MIN_SITES:
            raise ValueError(f"need a 1-d state with at least {MIN_SITES} sites")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "Z", float(self.Z))

    @property
    def n_sites(self) -> int:
        return self.amplitudes.size

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def power(self) -> float:
        return float(np.sum(self.intensity))

    @classmethod
    def single_site(cls, n: int, n_sites: int, Z: float = 0.0) -> "LatticeState":
        if not 0 <= n < n_sites:
            raise ValueError(f"site {n} outside lattice of {n_sites} sites")
        amps = np.zeros(n_sites, dtype=complex)
        amps[n] = 1.0
        return cls(Z, amps)


@dataclass(frozen=True)
class TruncatedHamiltonian:
    """Dense ``N x N`` matrix of the lattice Hamiltonian (bandwidth 2)."""

    params: DimensionlessParams
    matrix: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other


def nondimensionalize(p: PhysicalParams) -> tuple[DimensionlessParams, float]:
    """Map physical parameters onto ``(lam, alpha+, alpha-, beta)``.

    Returns the dimensionless parameters and the length scale ``C`` (1/cm)
    such that ``Z = C z``.
    """
    C = p.C_per_cm
    lam = p.alpha0_per_cm / C
    return DimensionlessParams(lam, p.alpha_plus, p.alpha_minus, p.beta), C


def _distance_first(n: int, p: PhysicalParams) -> float:
    return p.d1 - 0.5 * p.kappa * math.log(n)


def _distance_second(n: int, p: PhysicalParams) -> float:
    return p.d2 - 0.5 * p.kappa * math.log(n * (n - 1))


def coupling_first(n: int, side: str, p: PhysicalParams) -> float:
    """Nearest-neighbour coupling (1/cm) between sites ``n-1`` and ``n``.

    ``side='minus'`` gives the backward amplitude ``C_n^(1,-)`` and
    ``side='plus'`` the forward one; both follow the evanescent law
    ``alpha C exp[-(d_n - d1)/kappa]`` with ``d_n = d1 - (kappa/2) ln n``.
    """
    if side not in ("minus", "plus"):
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    if n < 0:
        raise ValueError("site index must be non-negative")
    if n == 0:
        return 0.0
    alpha = p.alpha_minus if side == "minus" else p.alpha_plus
    return alpha * p.C_per_cm * math.exp(-(_distance_first(n, p) - p.d1) / p.kappa)


def coupling_second(n: int, p: PhysicalParams) -> float:
    """Next-nearest-neighbour coupling ``C_n^(2)`` (1/cm); zero for ``n < 2``."""
    if n < 0:
        raise ValueError("site index must be non-negative")
    if n < 2:
        return 0.0
    return p.beta * p.C_per_cm * math.exp(-(_distance_second(n, p) - p.d2) / p.kappa)


def build_hamiltonian(params: DimensionlessParams, n_sites: int = DEFAULT_SITES) -> TruncatedHamiltonian:
    """Truncated lattice Hamiltonian with ``i dPsi/dZ = H Psi``."""
    if n_sites < MIN_SITES:
        raise ValueError(f"n_sites must be >= {MIN_SITES}, got {n_sites}")
    n = np.arange(n_sites, dtype=float)
    H = np.zeros((n_sites, n_sites), dtype=complex)
    H[n.astype(int), n.astype(int)] = -params.lam * n
    lower1 = np.sqrt(n[1:])
    lower2 = np.sqrt(n[2:] * (n[2:] - 1))
    idx1 = np.arange(1, n_sites)
    idx2 = np.arange(2, n_sites)
    H[idx1, idx1 - 1] = -params.alpha_minus * lower1
    H[idx1 - 1, idx1] = -params.alpha_plus * lower1
    H[idx2, idx2 - 2] = -params.beta * lower2
    H[idx2 - 2, idx2] = -params.beta * lower2
    H.setflags(write=False)
    return TruncatedHamiltonian(params, H)


def bloch_period(lam: float, beta: float) -> float:
    """Spatial period ``2 pi / sqrt(lam^2 - 4 beta^2)`` of the Bloch oscillations."""
    disc = lam * lam - 4.0 * beta * beta
    if disc <= 0:
        raise HyperbolicRegimeError(
            f"no oscillatory regime for lam={lam}, beta={beta}: lam^2 - 4 beta^2 = {disc:g} <= 0 "
            "(hyperbolic dynamics)"
        )
    return 2.0 * math.pi / math.sqrt(disc)
