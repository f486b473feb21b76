"""Closed-form propagator of the non-Hermitian zigzag Glauber-Fock lattice.

For a single excited input site ``n`` the amplitude at site ``m`` is

    Psi_m^(n)(Z) = exp(-i nu(Z)) sum_k S_{m,k}(Z) D_{k,n}(Z)

where ``S`` holds the Fock matrix elements of the su(1,1) squeezing-like
factor ``exp(g1 K+) exp(g0 K0) exp(g1 K-)`` and ``D`` those of the
displacement-like factor ``exp(-xi+ xi- / 2) exp(xi+ a^dag) exp(-xi- a)``.
All products of factorials and powers are assembled in log space and
exponentiated once, so indices of a few hundred are safe.
"""

from __future__ import annotations

import cmath
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .lattice import EPS_GAMMA, DimensionlessParams, LatticeState

__all__ = [
    "AmplitudeResult",
    "DegenerateParametersError",
    "SolverContext",
    "TruncationPolicy",
    "TruncationWarning",
    "ZFactors",
    "amplitude",
    "amplitude_rows",
    "d_element",
    "intensity_map",
    "laguerre",
    "make_context",
    "propagate",
    "s_element",
    "xi_curves",
    "z_factors",
]


class DegenerateParametersError(ValueError):
    """Raised when |4 beta^2 - lam^2| is too small for the closed form."""


class TruncationWarning(RuntimeWarning):
    """The k-series hit ``k_max`` before its tail converged."""


@dataclass(frozen=True)
class SolverContext:
    params: DimensionlessParams
    gamma_sq: float
    gamma: complex
    zeta_plus: float
    zeta_minus: float
    f_const: float

    def __post_init__(self):
        if abs(self.gamma_sq) <= EPS_GAMMA:
            raise DegenerateParametersError(
                f"|4 beta^2 - lam^2| = {abs(self.gamma_sq):.3g} <= {EPS_GAMMA:g}; "
                "the closed-form propagator is undefined for |lam| = 2 beta"
            )
        if abs(self.gamma * self.gamma - self.gamma_sq) > 1e-14 * max(1.0, abs(self.gamma_sq)):
            raise ValueError("gamma is not a square root of gamma_sq")

    @property
    def oscillatory(self) -> bool:
        """True when Gamma is imaginary (lam^2 > 4 beta^2): Bloch oscillations."""
        return self.gamma_sq < 0

    def condition_residuals(self) -> tuple[float, float]:
        """Residuals of the two conditions that remove the linear terms."""
        p = self.params
        r_minus = self.zeta_minus * p.lam + 2 * p.beta * self.zeta_plus - p.alpha_minus
        r_plus = self.zeta_plus * p.lam + 2 * p.beta * self.zeta_minus - p.alpha_plus
        return r_minus, r_plus


@dataclass(frozen=True)
class ZFactors:
    """The Z-dependent quantities of the factorised propagator.

    ``w`` is ``cosh(Gamma Z) - i (lam/Gamma) sinh(Gamma Z)``, so that
    ``g0 = -2 log w`` on the branch continuous in ``Z`` from ``g0(0) = 0``.
    """

    Z: float
    xi_plus: complex
    xi_minus: complex
    nu: float
    g0: complex
    g1: complex
    w: complex


@dataclass(frozen=True)
class TruncationPolicy:
    """Stopping rule for the infinite ``k`` sum.

    The sum stops once ``consecutive_below`` successive contributing terms
    satisfy ``|term| / max(1, |partial sum|) < tail_tol``.  Terms are only
    tested from ``k >= max(m, n)`` on; before that the series may still be
    growing from a tiny start.
    """

    tail_tol: float = 1e-14
    consecutive_below: int = 4
    k_max: int = 400

    def __post_init__(self):
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.consecutive_below < 1:
            raise ValueError("consecutive_below must be >= 1")
        if self.k_max < 20:
            raise ValueError("k_max must be >= 20")

    def check_indices(self, n: int, m: int = 0) -> None:
        if self.k_max < max(n, m) + 20:
            raise ValueError(f"k_max={self.k_max} too small for site indices n={n}, m={m}")


@dataclass(frozen=True)
class AmplitudeResult:
    value: complex
    converged: bool
    terms: int

    def __complex__(self):
        return complex(self.value)


def make_context(params: DimensionlessParams) -> SolverContext:
    """Precompute Gamma, zeta+-, f for the closed-form solution.

    The ratio form of ``f`` is used with denominators cleared,
    ``f = lam/2 - [alpha+ alpha- lam - beta (alpha-^2 + alpha+^2)] / Gamma^2``,
    which stays finite when either hopping amplitude vanishes.
    """
    lam, ap, am, b = params.lam, params.alpha_plus, params.alpha_minus, params.beta
    g2 = 4.0 * b * b - lam * lam
    if abs(g2) <= EPS_GAMMA:
        raise DegenerateParametersError(
            f"|4 beta^2 - lam^2| = {abs(g2):.3g} <= {EPS_GAMMA:g} (lam={lam}, beta={b}); "
            "the closed-form propagator is undefined for |lam| = 2 beta"
        )
    gamma = complex(np.sqrt(complex(g2)))
    zeta_minus = (2 * b * ap - lam * am) / g2
    zeta_plus = (2 * b * am - lam * ap) / g2
    f_const = lam / 2 - (ap * am * lam - b * (am * am + ap * ap)) / g2
    return SolverContext(params, g2, gamma, zeta_plus, zeta_minus, f_const)


def _continuous_log_w(w: complex, Z: float, ctx: SolverContext) -> complex:
    # w(Z) winds around the origin in the oscillatory regime; the principal log
    # jumps by 2 pi i every half Bloch period.  Its continuous argument stays
    # within pi/2 of -sign(lam) |Gamma| Z.
    principal = cmath.log(w)
    if not ctx.oscillatory:
        return principal  # Re w = cosh(Gamma Z) >= 1
    ref = -math.copysign(abs(ctx.gamma.imag) * Z, ctx.params.lam)
    turns = round((ref - principal.imag) / (2 * math.pi))
    return complex(principal.real, principal.imag + 2 * math.pi * turns)


def z_factors(Z: float, ctx: SolverContext) -> ZFactors:
    """Evaluate xi+-, nu, g0, g1 at distance ``Z``.

    Every expression depends on Gamma only through even combinations
    (``cosh(Gamma Z)``, ``sinh(Gamma Z)/Gamma``, ``Gamma^2``), so both square
    roots of ``Gamma^2`` give identical results.
    """
    p = ctx.params
    lam, ap, am, b = p.lam, p.alpha_plus, p.alpha_minus, p.beta
    Z = float(Z)
    if Z == 0.0:
        return ZFactors(0.0, 0j, 0j, 0.0, 0j, 0j, 1 + 0j)
    gz = ctx.gamma * Z
    ch = cmath.cosh(gz)
    sh_g = cmath.sinh(gz) / ctx.gamma
    half_sq = cmath.sinh(gz / 2) ** 2
    g2 = ctx.gamma_sq

    xi_plus = 2 * (lam * am - 2 * b * ap) * half_sq / g2 + 1j * am * sh_g
    xi_minus = 2 * (lam * ap - 2 * b * am) * half_sq / g2 - 1j * ap * sh_g

    zp, zm = ctx.zeta_plus, ctx.zeta_minus
    nu = ctx.f_const * Z - (zp * zm * lam + b * (zm * zm + zp * zp)) * sh_g
    if abs(nu.imag) > 1e-12 * max(1.0, abs(nu)):
        raise ArithmeticError(f"nu acquired an imaginary part {nu.imag:g} at Z={Z}")

    w = ch - 1j * lam * sh_g
    g0 = -2.0 * _continuous_log_w(w, Z, ctx)
    g1 = 2j * b * sh_g / w
    return ZFactors(Z, complex(xi_plus), complex(xi_minus), float(nu.real), g0, complex(g1), complex(w))


def laguerre(r: int, l: int, x: complex) -> complex:
    """Associated Laguerre polynomial ``L_r^(l)(x)`` by upward recurrence.

    Uses ``(j+1) L_{j+1} = (2j + 1 + l - x) L_j - (j + l) L_{j-1}``.
    """
    if r < 0 or l < 0:
        raise ValueError("r and l must be non-negative")
    prev, cur = 1.0 + 0j, 1.0 + l - x
    if r == 0:
        return prev
    for j in range(1, r):
        prev, cur = cur, ((2 * j + 1 + l - x) * cur - (j + l) * prev) / (j + 1)
    return cur


def _laguerre_vec(r: int, l: np.ndarray, x: complex) -> np.ndarray:
    # same recurrence, vectorised over the upper index
    l = np.asarray(l, dtype=float)
    prev = np.ones_like(l, dtype=complex)
    if r == 0:
        return prev
    cur = 1.0 + l - x
    for j in range(1, r):
        prev, cur = cur, ((2 * j + 1 + l - x) * cur - (j + l) * prev) / (j + 1)
    return cur


def _log(z: complex) -> complex:
    return cmath.log(z) if z != 0 else complex(-math.inf, 0.0)


def d_element(k: int, n: int, zf: ZFactors) -> complex:
    """Matrix element ``<k| exp(-xi+ xi-/2) exp(xi+ a^dag) exp(-xi- a) |n>``."""
    if k < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    x = zf.xi_plus * zf.xi_minus
    if k >= n:
        base, power = zf.xi_plus, k - n
        lag = laguerre(n, power, x)
        log_fact = 0.5 * (math.lgamma(n + 1) - math.lgamma(k + 1))
    else:
        base, power = -zf.xi_minus, n - k
        lag = laguerre(k, power, x)
        log_fact = 0.5 * (math.lgamma(k + 1) - math.lgamma(n + 1))
    if lag == 0 or (power > 0 and base == 0):
        return 0j
    log_val = -x / 2 + log_fact + cmath.log(lag)
    if power:
        log_val += power * _log(base)
    return cmath.exp(log_val)


def s_element(m: int, k: int, zf: ZFactors) -> complex:
    """Matrix element ``<m| exp(g1 K+) exp(g0 K0) exp(g1 K-) |k>``.

    Sum over ``p`` with ``m - p`` and ``k - p`` even, ``0 <= p <= min(m, k)``.
    The prefactor ``(g1/2)^((m+k)/2)`` and ``g1^-p`` are merged into the
    integer power ``(g1/2)^((m+k)/2 - p)``, so ``g1 = 0`` never divides.
    """
    if m < 0 or k < 0:
        raise ValueError("indices must be non-negative")
    if (m + k) % 2:
        return 0j
    log_root = 0.5 * (math.lgamma(m + 1) + math.lgamma(k + 1))
    log_half_g1 = _log(zf.g1 / 2)
    total = 0j
    for p in range(m % 2, min(m, k) + 1, 2):
        e = (m + k) // 2 - p
        if e > 0 and zf.g1 == 0:
            continue
        log_term = (log_root - math.lgamma(p + 1) - math.lgamma((m - p) // 2 + 1)
                    - math.lgamma((k - p) // 2 + 1) + zf.g0 * (0.25 + 0.5 * p))
        if e:
            log_term += e * log_half_g1
        total += cmath.exp(log_term)
    return total


def _check_sites(n: int, m: int, pol: TruncationPolicy) -> None:
    if n < 0 or m < 0:
        raise ValueError("site indices must be non-negative")
    pol.check_indices(n, m)


def _cutoff(terms: np.ndarray, m: int, n: int, pol: TruncationPolicy) -> int | None:
    """Index of the last term kept, or None when the tail never converged."""
    partial = np.cumsum(terms)
    scale = np.maximum(1.0, np.abs(partial))
    small = np.abs(terms) < pol.tail_tol * scale
    start = max(m, n)
    run = 0
    for k in range(m % 2, terms.size, 2):
        if k < start:
            continue
        run = run + 1 if small[k] else 0
        if run >= pol.consecutive_below:
            return k
    return None


def amplitude(n: int, m: int, Z: float, ctx: SolverContext,
              pol: TruncationPolicy = TruncationPolicy(), zf: ZFactors | None = None) -> AmplitudeResult:
    """Closed-form amplitude at site ``m`` for unit input at site ``n``.

    Element-by-element evaluation; :func:`amplitude_rows` is the vectorised
    equivalent used for grids.
    """
    _check_sites(n, m, pol)
    if zf is None:
        zf = z_factors(Z, ctx)
    partial = 0j
    run = 0
    start = max(m, n)
    count = 0
    converged = False
    for k in range(m % 2, pol.k_max + 1, 2):
        term = s_element(m, k, zf) * d_element(k, n, zf)
        partial += term
        count += 1
        if k >= start:
            run = run + 1 if abs(term) < pol.tail_tol * max(1.0, abs(partial)) else 0
            if run >= pol.consecutive_below:
                converged = True
                break
    if not converged:
        warnings.warn(f"k-series for n={n}, m={m}, Z={zf.Z} not converged at k_max={pol.k_max}",
                      TruncationWarning, stacklevel=2)
    return AmplitudeResult(cmath.exp(-1j * zf.nu) * partial, converged, count)


# ---------------------------------------------------------------------------
# vectorised kernels

def _s_factor(idx: np.ndarray, pmax: int, log_half_g1: complex | None) -> tuple[np.ndarray, np.ndarray]:
    # log of sqrt(m!) / (sqrt(p!) j!) (g1/2)^j with j = (m - p)/2, split into
    # a row scale and a bounded mantissa; invalid (m, p) pairs are zero
    M = idx[:, None]
    P = np.arange(pmax + 1)[None, :]
    J = (M - P) // 2
    valid = (P <= M) & ((M - P) % 2 == 0)
    if log_half_g1 is None:
        valid &= J == 0
    Jv = np.where(valid, J, 0)
    log_f = (0.5 * (gammaln(M + 1) - gammaln(P + 1)) - gammaln(Jv + 1)).astype(complex)
    if log_half_g1 is not None:
        log_f = log_f + Jv * log_half_g1
    log_f = np.where(valid, log_f, -np.inf)
    shift = np.max(log_f.real, axis=1)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    return np.exp(log_f - shift[:, None]), shift


def _s_block(ms: np.ndarray, ks: np.ndarray, zf: ZFactors) -> np.ndarray:
    """``S[m, k]`` for all pairs as ``L diag(c) R^T``.

    With ``j = (m-p)/2`` and ``i = (k-p)/2`` the power of ``g1/2`` is
    ``j + i``, so every summand factorises over ``m`` and ``k``.
    """
    ms, ks = np.asarray(ms), np.asarray(ks)
    pmax = int(min(ms.max(), ks.max()))
    log_half_g1 = cmath.log(zf.g1 / 2) if zf.g1 != 0 else None
    left, a = _s_factor(ms, pmax, log_half_g1)
    right, b = _s_factor(ks, pmax, log_half_g1)
    log_c = zf.g0 * (0.25 + 0.5 * np.arange(pmax + 1))
    c_shift = np.max(log_c.real)
    core = (left * np.exp(log_c - c_shift)) @ right.T
    with np.errstate(over="ignore", invalid="ignore"):
        scale = np.exp(a[:, None] + b[None, :] + c_shift)
        return np.where(core == 0, 0.0, core * scale)


def _d_column(ks: np.ndarray, n: int, zf: ZFactors) -> np.ndarray:
    ks = np.asarray(ks)
    out = np.zeros(ks.size, dtype=complex)
    x = zf.xi_plus * zf.xi_minus
    upper = ks >= n
    if np.any(upper):
        ku = ks[upper]
        power = ku - n
        lag = _laguerre_vec(n, power, x)
        log_mag = (-x / 2 + 0.5 * (gammaln(n + 1) - gammaln(ku + 1)))
        with np.errstate(divide="ignore"):
            log_lag = np.log(lag.astype(complex))
        if zf.xi_plus != 0:
            vals = np.exp(log_mag + power * cmath.log(zf.xi_plus) + log_lag)
        else:
            vals = np.where(power == 0, np.exp(log_mag + log_lag), 0.0)
        out[upper] = np.where(lag == 0, 0.0, vals)
    for i in np.nonzero(~upper)[0]:
        out[i] = d_element(int(ks[i]), n, zf)
    return out


def amplitude_rows(ms, n: int, zf: ZFactors,
                   pol: TruncationPolicy = TruncationPolicy()) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes ``Psi_m^(n)`` for all ``m`` in ``ms`` at one distance.

    Returns ``(values, converged)``.
    """
    ms = np.atleast_1d(np.asarray(ms, dtype=int))
    if ms.size == 0:
        return np.zeros(0, dtype=complex), np.ones(0, dtype=bool)
    _check_sites(n, int(ms.max()), pol)
    if np.any(ms < 0):
        raise ValueError("site indices must be non-negative")
    kcap = min(pol.k_max, max(int(ms.max()), n) + 48)
    while True:
        ks = np.arange(kcap + 1)
        terms = _s_block(ms, ks, zf) * _d_column(ks, n, zf)[None, :]
        cuts = [_cutoff(row, int(m), n, pol) for row, m in zip(terms, ms)]
        if all(c is not None for c in cuts) or kcap >= pol.k_max:
            break
        kcap = min(pol.k_max, 2 * kcap)
    values = np.empty(ms.size, dtype=complex)
    converged = np.empty(ms.size, dtype=bool)
    for i, c in enumerate(cuts):
        converged[i] = c is not None
        values[i] = terms[i, : (c if c is not None else kcap) + 1].sum()
    return cmath.exp(-1j * zf.nu) * values, converged


def propagate(initial, Z: float, ctx: SolverContext,
              pol: TruncationPolicy = TruncationPolicy(), n_sites: int | None = None) -> LatticeState:
    """Evolve an arbitrary superposition ``sum_n c_n |n>`` to distance ``Z``.

    ``n_sites`` sets how many output sites are returned (default: the length
    of ``initial``).  Sites whose series did not converge are marked in
    ``flags``.
    """
    coeffs = np.asarray(initial.amplitudes if isinstance(initial, LatticeState) else initial,
                        dtype=complex)
    n_sites = coeffs.size if n_sites is None else n_sites
    ms = np.arange(n_sites)
    zf = z_factors(Z, ctx)
    psi = np.zeros(n_sites, dtype=complex)
    flags = np.zeros(n_sites, dtype=bool)
    for n in np.nonzero(coeffs)[0]:
        vals, ok = amplitude_rows(ms, int(n), zf, pol)
        psi += coeffs[n] * vals
        flags |= ~ok
    if np.any(flags):
        warnings.warn(f"{int(flags.sum())} site(s) truncated at k_max={pol.k_max}, Z={Z}",
                      TruncationWarning, stacklevel=2)
    return LatticeState(Z, psi, flags)


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("ZIGZAG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def amplitude_grid(n: int, z_grid, m_range, ctx: SolverContext,
                   pol: TruncationPolicy = TruncationPolicy(),
                   workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Complex amplitudes and convergence flags on a ``(Z, m)`` grid."""
    z_grid = np.asarray(z_grid, dtype=float)
    ms = np.asarray(m_range, dtype=int)

    def row(z):
        return amplitude_rows(ms, n, z_factors(z, ctx), pol)

    nw = _worker_count(workers)
    if nw == 1:
        rows = [row(z) for z in z_grid]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            rows = list(pool.map(row, z_grid))
    values = np.array([r[0] for r in rows]).reshape(z_grid.size, ms.size)
    ok = np.array([r[1] for r in rows]).reshape(z_grid.size, ms.size)
    return values, ~ok


def intensity_map(n: int, z_grid, m_range, ctx: SolverContext,
                  pol: TruncationPolicy = TruncationPolicy(), workers: int | None = None):
    """Sample ``Psi_m^(n)(Z)`` on a grid and wrap it as a PropagationGrid."""
    from .grid import PropagationGrid

    values, flags = amplitude_grid(n, z_grid, m_range, ctx, pol, workers)
    return PropagationGrid(np.asarray(z_grid, dtype=float), np.asarray(m_range, dtype=int),
                           values, flags, meta={"method": "exact", "input_site": int(n)})


def xi_curves(z_grid, ctx: SolverContext) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(Re xi+, Im xi+, Re xi-, Im xi-)`` sampled on ``z_grid``."""
    zfs = [z_factors(z, ctx) for z in np.asarray(z_grid, dtype=float)]
    xp = np.array([zf.xi_plus for zf in zfs])
    xm = np.array([zf.xi_minus for zf in zfs])
    return xp.real, xp.imag, xm.real, xm.imag
