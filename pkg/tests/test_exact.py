import cmath
import dataclasses
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm
from scipy.special import eval_genlaguerre

from zigzag.exact import (
    DegenerateParametersError,
    TruncationPolicy,
    TruncationWarning,
    amplitude,
    amplitude_rows,
    d_element,
    intensity_map,
    laguerre,
    make_context,
    propagate,
    s_element,
    xi_curves,
    z_factors,
)
from zigzag.integrator import rhs
from zigzag.lattice import DimensionlessParams, bloch_period, build_hamiltonian
from zigzag.su11 import TripleCoefficients, annihilation, creation, disentangle, s_via_elements

HERMITIAN = DimensionlessParams(1.0, 2.0, 2.0, 0.15)


def dense_column(params, n, Z, dim=120):
    H = build_hamiltonian(params, dim).matrix
    return expm(-1j * H * Z)[:, n]


class TestContext:
    def test_amplified_hand_values(self, ctx2):
        assert ctx2.gamma_sq == pytest.approx(-0.91, abs=1e-15)
        assert ctx2.zeta_minus == pytest.approx(1.6044, abs=1e-4)
        assert ctx2.zeta_plus == pytest.approx(1.3187, abs=1e-4)
        assert ctx2.f_const == pytest.approx(3.2626, abs=1e-4)

    def test_zetas_solve_linear_conditions(self, amplified, ctx2):
        lam, b = amplified.lam, amplified.beta
        # [lam, 2b; 2b, lam] @ (zeta-, zeta+) = (alpha-, alpha+)
        sol = np.linalg.solve([[lam, 2 * b], [2 * b, lam]], [amplified.alpha_minus, amplified.alpha_plus])
        assert ctx2.zeta_minus == pytest.approx(sol[0], rel=1e-13)
        assert ctx2.zeta_plus == pytest.approx(sol[1], rel=1e-13)
        assert max(map(abs, ctx2.condition_residuals())) < 1e-12

    def test_f_matches_ratio_form(self, amplified, ctx2):
        lam, ap, am, b = (Fraction(x).limit_denominator(1000) for x in
                          (amplified.lam, amplified.alpha_plus, amplified.alpha_minus, amplified.beta))
        g2 = 4 * b * b - lam * lam
        f = lam / 2 - (ap * am / g2) * (lam - b * (am / ap + ap / am))
        assert ctx2.f_const == pytest.approx(float(f), rel=1e-14)

    def test_gamma_is_square_root(self, ctx2, ctx3):
        for ctx in (ctx2, ctx3):
            assert abs(ctx.gamma ** 2 - ctx.gamma_sq) < 1e-14
            assert ctx.oscillatory

    def test_no_second_order_coupling(self):
        ctx = make_context(DimensionlessParams(0.8, 1.3, 1.3, 0.0))
        assert ctx.zeta_plus == pytest.approx(1.3 / 0.8)
        assert ctx.zeta_minus == pytest.approx(1.3 / 0.8)

    def test_no_linear_terms(self):
        ctx = make_context(DimensionlessParams(1.0, 0.0, 0.0, 0.2))
        assert ctx.zeta_plus == 0 and ctx.zeta_minus == 0
        assert ctx.f_const == 0.5

    @pytest.mark.parametrize("lam,beta", [(1.0, 0.5), (-1.0, 0.5), (0.3, -0.15), (0.0, 0.0)])
    def test_degenerate_rejected(self, lam, beta):
        with pytest.raises(DegenerateParametersError):
            make_context(DimensionlessParams(lam, 1.0, 1.2, beta))

    @settings(max_examples=60, deadline=None)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-1.5, 1.5))
    def test_condition_residuals_vanish(self, lam, ap, am, beta):
        params = DimensionlessParams(lam, ap, am, beta)
        if abs(params.gamma_sq) < 1e-2:
            return
        ctx = make_context(params)
        scale = max(1.0, abs(ap), abs(am))
        assert max(map(abs, ctx.condition_residuals())) < 1e-12 * scale / min(1.0, abs(params.gamma_sq))


class TestZFactors:
    def test_zero_distance(self, ctx2):
        zf = z_factors(0.0, ctx2)
        assert (zf.xi_plus, zf.xi_minus, zf.nu, zf.g0, zf.g1) == (0, 0, 0, 0, 0)

    @pytest.mark.parametrize("Z", [0.3, 1.0, 3.2, 6.58, 10.0])
    def test_su11_factors_match_disentangle(self, amplified, ctx2, Z):
        zf = z_factors(Z, ctx2)
        ff = disentangle(TripleCoefficients(2j * amplified.beta * Z, 2j * amplified.lam * Z, 2j * amplified.beta * Z))
        assert abs(zf.g1 - ff.f) < 1e-12
        assert abs(zf.g1 - ff.h) < 1e-12
        assert abs(cmath.exp(-zf.g0 / 2) - ff.exp_minus_half_g) < 1e-12
        # g agrees up to the 4 pi i ambiguity of the principal branch
        k = (zf.g0 - ff.g).imag / (4 * math.pi)
        assert abs(k - round(k)) < 1e-12 and abs((zf.g0 - ff.g).real) < 1e-12

    @pytest.mark.parametrize("Z", [0.5, 2.0, 7.7])
    def test_branch_invariance(self, ctx2, Z):
        a = z_factors(Z, ctx2)
        b = z_factors(Z, dataclasses.replace(ctx2, gamma=-ctx2.gamma))
        for name in ("xi_plus", "xi_minus", "nu", "g0", "g1", "w"):
            assert abs(getattr(a, name) - getattr(b, name)) < 1e-14 * max(1, abs(getattr(a, name)))

    def test_branch_invariance_hyperbolic(self):
        ctx = make_context(DimensionlessParams(0.2, 1.1, 0.9, 0.3))
        for Z in (0.5, 3.0):
            a = z_factors(Z, ctx)
            b = z_factors(Z, dataclasses.replace(ctx, gamma=-ctx.gamma))
            assert abs(a.xi_plus - b.xi_plus) < 1e-12 and abs(a.g0 - b.g0) < 1e-12

    def test_nu_real(self, ctx2, ctx3):
        for ctx in (ctx2, ctx3):
            for Z in np.linspace(0, 20, 41):
                assert isinstance(z_factors(Z, ctx).nu, float)

    def test_exp_quarter_g0_continuous(self, ctx2):
        # the principal root would flip sign at each half Bloch period
        z = np.linspace(0, 20, 4001)
        q = np.array([cmath.exp(z_factors(x, ctx2).g0 / 4) for x in z])
        assert np.max(np.abs(np.diff(q))) < 1e-2

    def test_xi_formula_against_cleared_forms(self, amplified, ctx2):
        # (alpha-/G^2)[2(lam - 2 b alpha+/alpha-) sinh^2(G Z/2) + i G sinh(G Z)]
        lam, ap, am, b = amplified.lam, amplified.alpha_plus, amplified.alpha_minus, amplified.beta
        G, G2, Z = ctx2.gamma, ctx2.gamma_sq, 2.3
        xp = (am / G2) * (2 * (lam - 2 * b * ap / am) * cmath.sinh(G * Z / 2) ** 2 + 1j * G * cmath.sinh(G * Z))
        xm = (ap / G2) * (2 * (lam - 2 * b * am / ap) * cmath.sinh(G * Z / 2) ** 2 - 1j * G * cmath.sinh(G * Z))
        zf = z_factors(Z, ctx2)
        assert abs(zf.xi_plus - xp) < 1e-13 and abs(zf.xi_minus - xm) < 1e-13


class TestLaguerre:
    def test_low_orders(self):
        assert laguerre(0, 4, 2.5 + 1j) == 1
        for l in range(5):
            x = 0.7 - 0.3j
            assert laguerre(1, l, x) == pytest.approx(1 + l - x)
        assert laguerre(2, 0, 1.0) == pytest.approx(-0.5)

    @pytest.mark.parametrize("r", [3, 10, 25])
    @pytest.mark.parametrize("l", [0, 1, 7, 40])
    def test_real_argument_vs_scipy(self, r, l):
        for x in (0.1, 1.7, 6.0):
            assert laguerre(r, l, x).real == pytest.approx(eval_genlaguerre(r, l, x), rel=1e-11, abs=1e-11)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 15), st.integers(0, 30), st.complex_numbers(max_magnitude=4))
    def test_complex_argument_vs_explicit_sum(self, r, l, x):
        # L_r^(l)(x) = sum_i (-1)^i C(r+l, r-i) x^i / i!
        explicit = sum((-1) ** i * math.comb(r + l, r - i) * x ** i / math.factorial(i) for i in range(r + 1))
        assert abs(laguerre(r, l, x) - explicit) <= 1e-9 * max(1.0, abs(explicit))


def _dense_displacement(xp, xm, dim=40):
    a, ad = annihilation(dim), creation(dim)
    return np.exp(-xp * xm / 2) * expm(xp * ad) @ expm(-xm * a)


def _dense_squeeze(g0, g1, dim=50):
    a, ad = annihilation(dim), creation(dim)
    k0 = np.diag((np.arange(dim) + 0.5) / 2)
    return expm(g1 * ad @ ad / 2) @ expm(g0 * k0) @ expm(g1 * a @ a / 2)


class TestElements:
    def test_d_identity_at_zero(self, ctx2):
        zf = z_factors(0.0, ctx2)
        for k in range(8):
            for n in range(8):
                assert d_element(k, n, zf) == (1 if k == n else 0)

    def test_d_first_superdiagonal(self, ctx2):
        zf = dataclasses.replace(z_factors(1.0, ctx2), xi_plus=0.4 - 0.3j, xi_minus=0j)
        for n in range(6):
            assert abs(d_element(n + 1, n, zf) - (0.4 - 0.3j) * math.sqrt(n + 1)) < 1e-14

    @pytest.mark.parametrize("seed", range(4))
    def test_d_vs_dense_product(self, ctx2, seed):
        r = np.random.default_rng(seed)
        xp, xm = complex(*r.normal(size=2)), complex(*r.normal(size=2))
        zf = dataclasses.replace(z_factors(1.0, ctx2), xi_plus=xp, xi_minus=xm)
        M = _dense_displacement(xp, xm)
        for k in range(13):
            for n in range(13):
                assert abs(d_element(k, n, zf) - M[k, n]) < 1e-11 * max(1, abs(M[k, n]))

    def test_s_parity_and_identity(self, ctx2):
        zf = z_factors(2.0, ctx2)
        for m in range(10):
            for k in range(10):
                if (m + k) % 2:
                    assert s_element(m, k, zf) == 0
        z0 = z_factors(0.0, ctx2)
        for m in range(10):
            for k in range(10):
                assert s_element(m, k, z0) == (1 if m == k else 0)

    @pytest.mark.parametrize("seed", range(3))
    def test_s_vs_dense_product(self, ctx2, seed):
        r = np.random.default_rng(100 + seed)
        g0, g1 = complex(*r.normal(size=2)), 0.5 * complex(*r.normal(size=2))
        zf = dataclasses.replace(z_factors(1.0, ctx2), g0=g0, g1=g1)
        M = _dense_squeeze(g0, g1)
        for m in range(15):
            for k in range(15):
                assert abs(s_element(m, k, zf) - M[m, k]) < 1e-10 * max(1, abs(M[m, k]))

    def test_s_vs_oracle_elements(self, ctx2):
        zf = z_factors(4.4, ctx2)
        for m in range(21):
            for k in range(21):
                assert abs(s_element(m, k, zf) - s_via_elements(m, k, zf.g0, zf.g1)) < 1e-10

    def test_large_indices_do_not_overflow(self, ctx2):
        zf = z_factors(3.2, ctx2)
        assert np.isfinite(s_element(300, 280, zf))
        assert np.isfinite(d_element(350, 5, zf))


class TestAmplitude:
    def test_identity(self, ctx2):
        for n in range(0, 12, 3):
            for m in range(12):
                assert amplitude(n, m, 0.0, ctx2).value == (1 if m == n else 0)

    def test_scalar_and_vectorised_paths_agree(self, ctx2):
        zf = z_factors(3.2, ctx2)
        rows, ok = amplitude_rows(np.arange(41), 5, zf)
        assert ok.all()
        for m in (0, 1, 7, 25, 40):
            res = amplitude(5, m, 3.2, ctx2, zf=zf)
            assert res.converged
            assert abs(res.value - rows[m]) < 1e-13 * max(1, abs(rows[m]))

    @pytest.mark.parametrize("Z", [0.5, 3.2, 6.58, 10.0])
    def test_matches_dense_exponential(self, amplified, ctx2, Z):
        vals, _ = amplitude_rows(np.arange(41), 5, z_factors(Z, ctx2))
        assert np.max(np.abs(vals - dense_column(amplified, 5, Z)[:41])) < 1e-10

    @pytest.mark.parametrize("params", [
        DimensionlessParams(1.0, 0.0, 1.5, 0.15),
        DimensionlessParams(1.0, 1.5, 0.0, 0.15),
        DimensionlessParams(-1.0, 1.8, 2.0, 0.15),
        DimensionlessParams(0.2, 0.9, 1.1, 0.3),
    ], ids=["alpha+=0", "alpha-=0", "negative-lambda", "hyperbolic"])
    def test_other_regimes_vs_dense(self, params):
        ctx = make_context(params)
        for Z in (0.7, 2.5):
            vals, ok = amplitude_rows(np.arange(25), 3, z_factors(Z, ctx))
            ref = dense_column(params, 3, Z, dim=160)[:25]
            assert ok.all()
            assert np.max(np.abs(vals - ref)) < 1e-8 * max(1, np.max(np.abs(ref)))

    def test_ode_residual(self, amplified, ctx2):
        h = 1e-4
        ms = np.arange(0, 43)
        for Z in (1.0, 3.2, 7.5):
            lo, _ = amplitude_rows(ms, 5, z_factors(Z - h, ctx2))
            mid, _ = amplitude_rows(ms, 5, z_factors(Z, ctx2))
            hi, _ = amplitude_rows(ms, 5, z_factors(Z + h, ctx2))
            fd = (hi - lo) / (2 * h)
            stencil = rhs(mid, amplified)
            interior = slice(2, 40)
            scale = np.max(np.abs(stencil[interior]))
            assert np.max(np.abs(fd[interior] - stencil[interior])) < 1e-5 * scale

    def test_truncation_flag(self, ctx2):
        pol = TruncationPolicy(k_max=26)
        with pytest.warns(TruncationWarning):
            res = amplitude(5, 6, 6.0, ctx2, pol)
        assert not res.converged
        vals, ok = amplitude_rows([6], 5, z_factors(6.0, ctx2), pol)
        assert not ok[0]

    def test_policy_validation(self):
        with pytest.raises(ValueError):
            TruncationPolicy(tail_tol=0)
        with pytest.raises(ValueError):
            TruncationPolicy(k_max=25).check_indices(10)


class TestPropagate:
    def test_single_site(self, ctx2):
        state = propagate(np.eye(30)[5], 2.0, ctx2)
        zf = z_factors(2.0, ctx2)
        for m in (0, 5, 13):
            assert abs(state.amplitudes[m] - amplitude(5, m, 2.0, ctx2, zf=zf).value) < 1e-13

    def test_superposition(self, ctx2):
        a, b = 0.3 + 0.4j, -1.1
        c = np.zeros(30, dtype=complex)
        c[3], c[7] = a, b
        state = propagate(c, 2.7, ctx2)
        e3 = propagate(np.eye(30)[3], 2.7, ctx2).amplitudes
        e7 = propagate(np.eye(30)[7], 2.7, ctx2).amplitudes
        np.testing.assert_allclose(state.amplitudes, a * e3 + b * e7, atol=1e-12)

    def test_hermitian_norm(self):
        ctx = make_context(HERMITIAN)
        c = np.zeros(80, dtype=complex)
        c[4], c[6] = 0.6, 0.8j
        for Z in (1.0, 5.0, 10.0):
            state = propagate(c, Z, ctx)
            assert abs(state.power - 1.0) < 1e-8

    def test_output_sites(self, ctx2):
        state = propagate(np.eye(10)[2], 1.0, ctx2, n_sites=50)
        assert state.n_sites == 50 and not state.flags.any()


class TestGrids:
    def test_intensity_map_first_row_one_hot(self, ctx2):
        grid = intensity_map(5, np.linspace(0, 2, 5), np.arange(20), ctx2, workers=1)
        assert np.array_equal(grid.intensity[0], np.eye(20)[5])

    def test_amplification_and_decay(self, ctx2, ctx3):
        zp = bloch_period(1.0, 0.15)
        z = np.linspace(0, zp, 21)
        grow = intensity_map(5, z, np.arange(80), ctx2, workers=1).total_power
        decay = intensity_map(5, z, np.arange(80), ctx3, workers=1).total_power
        assert grow[10] > 15 and decay[10] < 0.75
        assert grow[1:-1].min() > 1 > decay[1:-1].max()
        # power returns to its launch value after one Bloch period
        assert grow[-1] == pytest.approx(1, abs=1e-8)
        assert decay[-1] == pytest.approx(1, abs=1e-8)

    def test_threaded_matches_serial(self, ctx2):
        z = np.linspace(0, 4, 9)
        a = intensity_map(5, z, np.arange(30), ctx2, workers=1)
        b = intensity_map(5, z, np.arange(30), ctx2, workers=3)
        assert np.array_equal(a.values, b.values)

    def test_xi_curves(self, ctx2, ctx3):
        z = np.linspace(0, 10, 201)
        for ctx, plus_wins in ((ctx2, True), (ctx3, False)):
            rp, ip, rm, im = xi_curves(z, ctx)
            assert rp[0] == ip[0] == rm[0] == im[0] == 0
            plus, minus = np.hypot(rp, ip).max(), np.hypot(rm, im).max()
            assert (plus > minus) == plus_wins
