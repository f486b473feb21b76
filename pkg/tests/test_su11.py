import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from zigzag.lattice import DimensionlessParams, build_hamiltonian
from zigzag.su11 import (
    FactorizationError,
    FactoredForm,
    TripleCoefficients,
    annihilation,
    creation,
    dense_oracle,
    disentangle,
    expm_taylor,
    factored_product_2x2,
    fock_element_kminus,
    fock_element_kplus,
    oracle_column,
    s_via_elements,
    su11_closed_form_2x2,
)

KP = np.array([[0, 1], [0, 0]], dtype=complex)
K0 = np.diag([0.5, -0.5]).astype(complex)
KM = np.array([[0, 0], [-1, 0]], dtype=complex)


def generator(t):
    return t.a_plus * KP + t.a0 * K0 + t.a_minus * KM


def random_triple(r, scale=1.0):
    return TripleCoefficients(*(scale * complex(*r.normal(size=2)) for _ in range(3)))


def test_representation_commutators():
    comm = lambda a, b: a @ b - b @ a
    np.testing.assert_array_equal(comm(K0, KP), KP)
    np.testing.assert_array_equal(comm(K0, KM), -KM)
    np.testing.assert_array_equal(comm(KM, KP), 2 * K0)


class TestDisentangle:
    def test_pure_k0(self):
        ff = disentangle(TripleCoefficients(0, 0.7 + 0.2j, 0))
        assert ff.f == 0 and ff.h == 0
        assert abs(ff.g - (0.7 + 0.2j)) < 1e-15

    def test_zero_generator(self):
        ff = disentangle(TripleCoefficients(0, 0, 0))
        assert (ff.f, ff.g, ff.h) == (0, 0, 0)

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.2])
    def test_symmetric_real_pair(self, a):
        # A = -4a^2: exp(-g/2) = cos a, f = h = tan a
        ff = disentangle(TripleCoefficients(a, 0, a))
        assert abs(ff.f - math.tan(a)) < 1e-14
        assert abs(ff.h - math.tan(a)) < 1e-14
        assert abs(ff.g + 2 * math.log(math.cos(a))) < 1e-14

    def test_round_trip_random(self, rng):
        worst = 0.0
        for _ in range(1000):
            t = random_triple(rng)
            try:
                ff = disentangle(t)
            except FactorizationError:
                continue
            lhs = expm(generator(t))
            rhs = factored_product_2x2(ff)
            worst = max(worst, np.max(np.abs(lhs - rhs)) / max(1, np.max(np.abs(lhs))))
        assert worst < 1e-10

    @settings(max_examples=200, deadline=None)
    @given(st.complex_numbers(max_magnitude=2), st.complex_numbers(max_magnitude=2),
           st.complex_numbers(max_magnitude=2))
    def test_closed_form_matches_expm(self, ap, a0, am):
        t = TripleCoefficients(ap, a0, am)
        ref = expm(generator(t))
        got = su11_closed_form_2x2(t)
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1, np.max(np.abs(ref)))
        np.testing.assert_allclose(expm_taylor(generator(t)), ref, rtol=1e-12, atol=1e-12)

    def test_near_zero_discriminant(self):
        # A0^2 = 4 A+ A- exactly and within 1e-9: no jump between branches
        exact = disentangle(TripleCoefficients(0.5, 1.0, 0.5))
        near = disentangle(TripleCoefficients(0.5, 1.0, 0.5 + 1e-9))
        assert abs(exact.f - near.f) < 1e-8 and abs(exact.g - near.g) < 1e-8
        assert np.max(np.abs(factored_product_2x2(exact) - expm(generator(TripleCoefficients(0.5, 1.0, 0.5))))) < 1e-13

    @settings(max_examples=50, deadline=None)
    @given(st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.5))
    def test_equal_outer_coefficients(self, a, a0):
        try:
            ff = disentangle(TripleCoefficients(a, a0, a))
        except FactorizationError:
            return
        assert ff.f == ff.h

    def test_branch_is_principal(self, rng):
        for _ in range(200):
            try:
                ff = disentangle(random_triple(rng, 3.0))
            except FactorizationError:
                continue
            assert -2 * math.pi < ff.g.imag <= 2 * math.pi

    def test_continuous_in_coefficients(self):
        ts = np.linspace(0.0, 1.0, 201)
        vals = [disentangle(TripleCoefficients(0.3j * t, 1j * t, 0.3j * t)) for t in ts]
        for a, b in zip(vals, vals[1:]):
            assert abs(a.f - b.f) < 0.05 and abs(a.g - b.g) < 0.05

    def test_singular_point_raises(self):
        with pytest.raises(FactorizationError, match="does not exist"):
            disentangle(TripleCoefficients(math.pi / 2, 0, math.pi / 2))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            TripleCoefficients(float("nan"), 0, 0)


class TestFockElements:
    @pytest.mark.parametrize("h", [0.3, 0.2 - 0.5j])
    def test_kminus_vs_dense(self, h):
        dim = 40
        a = annihilation(dim)
        M = expm(h * a @ a / 2)
        for m in range(25):
            for n in range(25):
                assert abs(fock_element_kminus(m, n, h) - M[m, n]) < 1e-10 * max(1, abs(M[m, n]))

    def test_kplus_is_transpose(self):
        dim = 40
        ad = creation(dim)
        f = 0.4 + 0.1j
        M = expm(f * ad @ ad / 2)
        for m in range(25):
            for n in range(25):
                assert abs(fock_element_kplus(m, n, f) - M[m, n]) < 1e-10 * max(1, abs(M[m, n]))

    def test_selection_rules(self):
        assert fock_element_kminus(3, 4, 0.5) == 0
        assert fock_element_kminus(4, 2, 0.5) == 0
        assert fock_element_kminus(2, 2, 0.5) == 1
        assert fock_element_kminus(0, 2, 0.5) == pytest.approx(math.sqrt(2) * 0.25)

    def test_negative_index(self):
        with pytest.raises(ValueError):
            fock_element_kminus(-1, 2, 0.1)

    def test_s_with_vanishing_g0(self):
        # g0 = 0: <m|exp(g1 K+) exp(g1 K-)|0> = e^{0} (g1/2)^{m/2} sqrt(m!)/(m/2)!
        g1 = 0.3 - 0.2j
        for m in range(0, 12, 2):
            want = (g1 / 2) ** (m // 2) * math.sqrt(math.factorial(m)) / math.factorial(m // 2)
            assert abs(s_via_elements(m, 0, 0, g1) - want * cmath.exp(0)) < 1e-14

    def test_s_vs_dense(self):
        dim = 60
        a, ad = annihilation(dim), creation(dim)
        g0, g1 = 0.3 + 0.4j, -0.2 + 0.1j
        k0 = np.diag((np.arange(dim) + 0.5) / 2)
        M = expm(g1 * ad @ ad / 2) @ expm(g0 * k0) @ expm(g1 * a @ a / 2)
        for m in range(20):
            for k in range(20):
                assert abs(s_via_elements(m, k, g0, g1) - M[m, k]) < 1e-10


class TestOracle:
    def test_identity(self):
        op = dense_oracle(DimensionlessParams(1.0, 1.8, 2.0, 0.15), 30, 0.0)
        np.testing.assert_array_equal(op.matrix, np.eye(30))

    def test_hermitian_unitary(self):
        op = dense_oracle(DimensionlessParams(1.0, 2.0, 2.0, 0.15), 40, 3.0)
        np.testing.assert_allclose(op.matrix.conj().T @ op.matrix, np.eye(40), atol=1e-11)

    @pytest.mark.parametrize("Z", [0.4, 3.2, 10.0])
    def test_agrees_with_scipy(self, Z):
        params = DimensionlessParams(1.0, 1.8, 2.0, 0.15)
        H = build_hamiltonian(params, 60).matrix
        ref = expm(-1j * H * Z)
        got = dense_oracle(params, 60, Z).matrix
        assert np.max(np.abs(got - ref)) < 1e-9 * np.max(np.abs(ref))

    def test_small_dimension_rejected(self):
        with pytest.raises(ValueError):
            dense_oracle(DimensionlessParams(1.0, 1.0, 1.0, 0.1), 10, 1.0)

    def test_column_enlarges_dimension(self):
        params = DimensionlessParams(1.0, 1.8, 2.0, 0.15)
        col, dim = oracle_column(params, 5, 3.2, dim=20)
        assert dim > 20
        assert np.max(np.abs(col[-10:])) <= 1e-10 * np.max(np.abs(col))

    def test_taylor_non_finite(self):
        with pytest.raises(ArithmeticError):
            expm_taylor(np.array([[np.inf]]))

    def test_factored_product_identity(self):
        np.testing.assert_array_equal(factored_product_2x2(FactoredForm(0, 0, 0)), np.eye(2))
