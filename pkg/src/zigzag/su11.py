"""su(1,1) disentangling and dense-matrix oracles.

``exp(A+ K+ + A0 K0 + A- K-) = exp(f K+) exp(g K0) exp(h K-)`` is solved in
the two-dimensional representation

    K+ = [[0, 1], [0, 0]],  K0 = diag(1/2, -1/2),  K- = [[0, 0], [-1, 0]]

and the resulting ``f, g, h`` are used in the oscillator realization
``K+ = a^dag^2 / 2``, ``K0 = (n + 1/2) / 2``, ``K- = a^2 / 2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .lattice import DimensionlessParams, build_hamiltonian

__all__ = [
    "DenseOperator",
    "FactorizationError",
    "FactoredForm",
    "TripleCoefficients",
    "annihilation",
    "creation",
    "dense_oracle",
    "disentangle",
    "expm_taylor",
    "factored_product_2x2",
    "fock_element_kminus",
    "fock_element_kplus",
    "s_via_elements",
    "su11_closed_form_2x2",
]


class FactorizationError(ValueError):
    """The factored form does not exist (``exp(-g/2)`` vanishes)."""


@dataclass(frozen=True)
class TripleCoefficients:
    a_plus: complex
    a0: complex
    a_minus: complex

    def __post_init__(self):
        for name in ("a_plus", "a0", "a_minus"):
            v = complex(getattr(self, name))
            if not cmath.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def discriminant(self) -> complex:
        """``A = A0^2 - 4 A+ A-``."""
        return self.a0 * self.a0 - 4 * self.a_plus * self.a_minus


@dataclass(frozen=True)
class FactoredForm:
    f: complex
    g: complex
    h: complex

    @property
    def exp_minus_half_g(self) -> complex:
        return cmath.exp(-self.g / 2)


@dataclass(frozen=True)
class DenseOperator:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def column(self, n: int) -> np.ndarray:
        return self.matrix[:, n]


def _cosh_sinhc(A: complex) -> tuple[complex, complex]:
    """``cosh(sqrt(A)/2)`` and ``sinh(sqrt(A)/2) / sqrt(A)``.

    Both are even in ``sqrt(A)``; near ``A = 0`` the Taylor series in ``A``
    is summed instead.
    """
    if abs(A) > 1e-3:
        r = cmath.sqrt(A)
        return cmath.cosh(r / 2), cmath.sinh(r / 2) / r
    # x = A/4: cosh = sum x^j/(2j)!, sinh(r/2)/r = (1/2) sum x^j/(2j+1)!
    x = A / 4
    c = s = 0j
    term_c, term_s = 1 + 0j, 0.5 + 0j
    for j in range(12):
        c += term_c
        s += term_s
        term_c *= x / ((2 * j + 1) * (2 * j + 2))
        term_s *= x / ((2 * j + 2) * (2 * j + 3))
    return c, s


def su11_closed_form_2x2(t: TripleCoefficients) -> np.ndarray:
    """``exp([[A0/2, A+], [-A-, -A0/2]])`` in closed form."""
    c, s = _cosh_sinhc(t.discriminant)
    return np.array([
        [c + t.a0 * s, 2 * t.a_plus * s],
        [-2 * t.a_minus * s, c - t.a0 * s],
    ], dtype=complex)


def factored_product_2x2(ff: FactoredForm) -> np.ndarray:
    """``exp(f K+) exp(g K0) exp(h K-)`` in the 2x2 representation."""
    ep = cmath.exp(ff.g / 2)
    em = cmath.exp(-ff.g / 2)
    return np.array([
        [ep - ff.f * em * ff.h, ff.f * em],
        [-em * ff.h, em],
    ], dtype=complex)


def disentangle(t: TripleCoefficients, tol: float = 1e-13) -> FactoredForm:
    """Solve for ``f, g, h`` with ``g`` on the principal logarithm branch.

    Raises
    ------
    FactorizationError
        If ``exp(-g/2) = cosh(sqrt(A)/2) - A0 sinh(sqrt(A)/2)/sqrt(A)`` vanishes.
    """
    c, s = _cosh_sinhc(t.discriminant)
    e = c - t.a0 * s
    if abs(e) < tol:
        raise FactorizationError(
            f"factored form does not exist at this point: exp(-g/2) = {e:.3g}"
        )
    g = -2 * cmath.log(e)
    f = 2 * t.a_plus * s / e
    h = 2 * t.a_minus * s / e
    return FactoredForm(f, g, h)


def _ratio_sqrt_fact(big: int, small: int) -> float:
    return math.exp(0.5 * (math.lgamma(big + 1) - math.lgamma(small + 1)))


def fock_element_kminus(m: int, n: int, h: complex) -> complex:
    """``<m| exp(h a^2 / 2) |n>``; nonzero only for ``n >= m`` with ``n - m`` even."""
    if m < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    d = n - m
    if d < 0 or d % 2:
        return 0j
    j = d // 2
    if j == 0:
        return 1 + 0j
    return _ratio_sqrt_fact(n, m) * (h / 2) ** j / math.factorial(j)


def fock_element_kplus(m: int, n: int, f: complex) -> complex:
    """``<m| exp(f a^dag^2 / 2) |n>``; transpose of the ``K-`` element."""
    return fock_element_kminus(n, m, f)


def s_via_elements(m: int, k: int, g0: complex, g1: complex) -> complex:
    """``<m| exp(g1 K+) exp(g0 K0) exp(g1 K-) |k>`` as a product of elements.

    Inserts the identity between the three factors; the intermediate index
    ``j`` only runs over ``j <= min(m, k)``.
    """
    if (m + k) % 2:
        return 0j
    total = 0j
    for j in range(min(m, k) + 1):
        left = fock_element_kplus(m, j, g1)
        if left == 0:
            continue
        right = fock_element_kminus(j, k, g1)
        total += left * cmath.exp(g0 * (j + 0.5) / 2) * right
    return total


def annihilation(dim: int) -> np.ndarray:
    """Truncated ladder matrix ``a`` with ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def creation(dim: int) -> np.ndarray:
    return annihilation(dim).T.copy()


def expm_taylor(A: np.ndarray, tol: float = 2.0 ** -53, max_terms: int = 60) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor core.

    ``A`` is scaled by ``2^-s`` so that its 1-norm is at most 1/2; the Taylor
    series is then summed until the next term is below ``tol`` relative to the
    partial sum, and the result is squared ``s`` times.
    """
    A = np.asarray(A, dtype=complex)
    norm = np.linalg.norm(A, 1)
    if not np.isfinite(norm):
        raise ArithmeticError("matrix exponential of a non-finite matrix")
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    B = A / 2.0 ** s
    result = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for j in range(1, max_terms + 1):
        term = term @ B / j
        result += term
        if np.linalg.norm(term, 1) <= tol * np.linalg.norm(result, 1):
            break
    else:
        raise ArithmeticError(f"Taylor series did not converge in {max_terms} terms (norm {norm:g})")
    for _ in range(s):
        result = result @ result
    if not np.all(np.isfinite(result)):
        raise ArithmeticError(f"matrix exponential overflowed (norm {norm:g}, {s} squarings)")
    return result


def dense_oracle(params: DimensionlessParams, dim: int, Z: float) -> DenseOperator:
    """Ground-truth propagator ``exp(-i H Z)`` on ``dim`` truncated sites."""
    if dim < 20:
        raise ValueError("dim must be >= 20")
    H = build_hamiltonian(params, dim).matrix
    return DenseOperator(expm_taylor(-1j * Z * H))


def oracle_column(params: DimensionlessParams, n: int, Z: float, dim: int = 80,
                  max_dim: int = 320, corner_tol: float = 1e-10) -> tuple[np.ndarray, int]:
    """Column ``n`` of the dense propagator, enlarging ``dim`` until the
    top 10 entries are below ``corner_tol`` times the column maximum.

    Returns the column and the dimension finally used.
    """
    while True:
        col = dense_oracle(params, dim, Z).column(n)
        peak = np.max(np.abs(col))
        if peak == 0 or np.max(np.abs(col[-10:])) <= corner_tol * peak or dim >= max_dim:
            return col, dim
        dim = min(max_dim, 2 * dim)
