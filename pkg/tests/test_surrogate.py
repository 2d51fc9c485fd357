"""Tests for the quadratic-form algebra and the three surrogate bounds.

Expected values are either closed-form constants or computed against direct
dense linear-algebra oracles written out locally in this file.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from franopt.surrogate import (
    ComplexAffine,
    ConvexSubproblem,
    DecisionLayout,
    QuadraticForm,
    compose_logdet_lower,
    compose_logdet_upper,
    compose_sinr_bound,
    hstack_affine,
    logdet_bound_coeffs,
    logdet_lower_bound,
    logdet_ratio,
    logdet_upper_bound,
    logdet_upper_truth,
    psd_inv_sqrt,
    psd_sqrt,
    quadform_eval,
    sinr_bound_coeffs,
    sinr_lower_bound,
)


# ----------------------------------------------------------------------
# oracles
# ----------------------------------------------------------------------

def logdet_ratio_oracle(V, Y):
    V = np.atleast_2d(V)
    Y = np.atleast_2d(Y)
    s, d = np.linalg.slogdet(np.eye(Y.shape[0]) + V @ V.conj().T @ np.linalg.inv(Y))
    assert s > 0
    return d


def rand_pd(n, rng, jitter=0.05):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T / n + jitter * np.eye(n)


# ----------------------------------------------------------------------
# QuadraticForm
# ----------------------------------------------------------------------

class TestQuadraticForm:
    def test_norm_square_at_3_4(self):
        # ||z||^2 at z = (3, 4) is 25
        q = QuadraticForm(2)
        q.add_plus([0, 1], np.eye(2))
        assert quadform_eval(q, np.array([3.0, 4.0])) == pytest.approx(25.0)

    def test_zero_form(self):
        q = QuadraticForm(3)
        assert quadform_eval(q, np.ones(3)) == 0.0
        assert q.convexity() == "affine"

    def test_against_dense_matrix_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = 6
            c0 = rng.standard_normal()
            lin = rng.standard_normal(n)
            q = QuadraticForm(n, constant=c0, lin=lin.copy())
            Q = np.zeros((n, n))
            qlin = np.zeros(n)
            qconst = 0.0
            for _ in range(3):
                cols = rng.choice(n, size=3, replace=False)
                M = rng.standard_normal((2, 3))
                m0 = rng.standard_normal(2)
                sign = rng.choice([-1.0, 1.0])
                if sign > 0:
                    q.add_plus(cols, M, m0)
                else:
                    q.add_minus(cols, M, m0)
                # expand sign * ||M E z + m0||^2 into dense pieces
                E = np.zeros((3, n))
                E[np.arange(3), cols] = 1.0
                Q += sign * E.T @ (M.T @ M) @ E
                qlin += sign * 2.0 * E.T @ (M.T @ m0)
                qconst += sign * float(m0 @ m0)
            z = rng.standard_normal(n)
            direct = c0 + qconst + (lin + qlin) @ z + z @ Q @ z
            assert quadform_eval(q, z) == pytest.approx(direct, rel=0, abs=1e-9)

    def test_scaled_and_negated(self):
        rng = np.random.default_rng(3)
        q = QuadraticForm(4, constant=1.5, lin=rng.standard_normal(4))
        q.add_plus([0, 2], rng.standard_normal((2, 2)), rng.standard_normal(2))
        q.add_minus([1, 3], rng.standard_normal((1, 2)), rng.standard_normal(1))
        z = rng.standard_normal(4)
        assert quadform_eval(q.scaled(2.5), z) == pytest.approx(2.5 * quadform_eval(q, z))
        assert quadform_eval(q.negated(), z) == pytest.approx(-quadform_eval(q, z))
        assert q.scaled(3.0).convexity() == "indefinite"

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(11)
        q = QuadraticForm(5, constant=0.3, lin=rng.standard_normal(5))
        q.add_plus([0, 1, 4], rng.standard_normal((2, 3)), rng.standard_normal(2))
        q.add_minus([2, 3], rng.standard_normal((2, 2)), rng.standard_normal(2))
        z = rng.standard_normal(5)
        g = q.gradient(z)
        for j in range(5):
            e = np.zeros(5)
            e[j] = 1e-6
            fd = (q.value(z + e) - q.value(z - e)) / 2e-6
            assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-6)

    def test_value_many_matches_scalar(self):
        rng = np.random.default_rng(5)
        q = QuadraticForm(3, constant=-0.2, lin=rng.standard_normal(3))
        q.add_plus([0, 2], rng.standard_normal((2, 2)))
        Z = rng.standard_normal((10, 3))
        vals = q.value(Z)
        for i in range(10):
            assert vals[i] == pytest.approx(quadform_eval(q, Z[i]))

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_convex_form_above_tangent(self, seed):
        # a convex form must dominate its first-order model everywhere
        rng = np.random.default_rng(seed)
        q = QuadraticForm(4, constant=rng.standard_normal(),
                          lin=rng.standard_normal(4))
        q.add_plus(np.arange(4), rng.standard_normal((3, 4)), rng.standard_normal(3))
        z0 = rng.standard_normal(4)
        g = q.gradient(z0)
        f0 = q.value(z0)
        z = rng.standard_normal(4)
        assert q.value(z) >= f0 + g @ (z - z0) - 1e-9


# ----------------------------------------------------------------------
# ComplexAffine
# ----------------------------------------------------------------------

class TestComplexAffine:
    def test_value_and_real_rows(self):
        rng = np.random.default_rng(1)
        cols = np.array([1, 3])
        coef = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
        off = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        amap = ComplexAffine(cols, coef, off)
        z = rng.standard_normal(5)
        U = amap.value(z)
        rcols, M, m0 = amap.real_rows()
        r = M @ z[rcols] + m0
        # interleaved (Re, Im) per entry, row-major over (i, j)
        flat = U.reshape(-1)
        assert np.allclose(r[0::2], flat.real)
        assert np.allclose(r[1::2], flat.imag)
        # Frobenius norm squared through rows
        assert float(r @ r) == pytest.approx(np.linalg.norm(U) ** 2)

    def test_lmul_scaled_conj(self):
        rng = np.random.default_rng(2)
        amap = ComplexAffine([0, 2],
                             rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2)),
                             rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)))
        z = rng.standard_normal(3)
        M = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        assert np.allclose(amap.lmul(M).value(z), M @ amap.value(z))
        assert np.allclose(amap.scaled(2j).value(z), 2j * amap.value(z))
        assert np.allclose(amap.conj().value(z), np.conj(amap.value(z)))

    def test_hstack(self):
        rng = np.random.default_rng(4)
        a = ComplexAffine([0, 1], rng.standard_normal((2, 1, 2)) * (1 + 1j),
                          np.zeros((2, 1), dtype=complex))
        b = ComplexAffine([0, 1], rng.standard_normal((2, 2, 2)) * (1 - 0.5j),
                          np.ones((2, 2), dtype=complex))
        z = rng.standard_normal(2)
        st_ = hstack_affine([a, b])
        assert st_.shape == (2, 3)
        assert np.allclose(st_.value(z), np.hstack([a.value(z), b.value(z)]))


# ----------------------------------------------------------------------
# psd helpers
# ----------------------------------------------------------------------

def test_psd_sqrt_roundtrip():
    rng = np.random.default_rng(9)
    A = rand_pd(5, rng)
    R = psd_sqrt(A)
    assert np.allclose(R @ R.conj().T, A, atol=1e-12)
    Ri = psd_inv_sqrt(A)
    assert np.allclose(Ri @ A @ Ri.conj().T, np.eye(5), atol=1e-10)


def test_psd_sqrt_clips_negative_eigenvalues():
    A = np.diag([1.0, -1e-12])
    R = psd_sqrt(A)
    w = np.linalg.eigvalsh(R @ R.conj().T)
    assert w.min() >= 0.0


# ----------------------------------------------------------------------
# the three bounds
# ----------------------------------------------------------------------

class TestScalarBound:
    def test_frozen_value(self):
        # expansion at (1, 1): ln 2 - 1 + 0 - 0.5 * (0 + 1) = ln 2 - 1.5
        assert sinr_lower_bound(0.0, 1.0, 1.0, 1.0) == pytest.approx(
            -0.8068528194400547, abs=1e-14)

    def test_tight_at_expansion(self):
        assert sinr_lower_bound(1.0, 1.0, 1.0, 1.0) == pytest.approx(np.log(2.0), abs=1e-14)
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = rng.standard_normal() + 1j * rng.standard_normal()
            y = rng.uniform(0.1, 4.0)
            truth = np.log1p(abs(v) ** 2 / y)
            assert sinr_lower_bound(v, y, v, y) == pytest.approx(truth, abs=1e-12)

    def test_coeffs_positive_c(self):
        a0, b, c = sinr_bound_coeffs(1 + 1j, 2.0)
        assert c == pytest.approx(0.25)
        assert b == pytest.approx(0.5 - 0.5j)
        assert a0 == pytest.approx(np.log(2.0) - 1.0)

    def test_never_exceeds_truth(self):
        rng = np.random.default_rng(42)
        for _ in range(5000):
            v, vb = rng.standard_normal(2) * 2 + 1j * rng.standard_normal(2)
            y, yb = rng.uniform(0.02, 5.0, 2)
            assert sinr_lower_bound(v, y, vb, yb) <= np.log1p(abs(v) ** 2 / y) + 1e-12

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=50, deadline=None)
    def test_bound_property(self, seed):
        rng = np.random.default_rng(seed)
        v, vb = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) * rng.uniform(0.05, 10)
        y, yb = rng.uniform(1e-3, 1e3, 2)
        assert sinr_lower_bound(v, y, vb, yb) <= np.log1p(abs(v) ** 2 / y) + 1e-10


class TestMatrixLowerBound:
    def test_reduces_to_scalar_for_1x1(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            v, vb = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            y, yb = rng.uniform(0.1, 3.0, 2)
            got = logdet_lower_bound([[v]], [[y]], [[vb]], [[yb]])
            want = sinr_lower_bound(v, y, vb, yb)
            assert got == pytest.approx(want, abs=1e-12)

    def test_tight_at_expansion(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            n, w = rng.integers(1, 4), rng.integers(1, 4)
            V = rng.standard_normal((n, w)) + 1j * rng.standard_normal((n, w))
            Y = rand_pd(n, rng)
            assert logdet_lower_bound(V, Y, V, Y) == pytest.approx(
                logdet_ratio_oracle(V, Y), abs=1e-10)

    def test_never_exceeds_truth(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            n, w = rng.integers(1, 4), rng.integers(1, 4)
            V = rng.standard_normal((n, w)) + 1j * rng.standard_normal((n, w))
            Vb = rng.standard_normal((n, w)) + 1j * rng.standard_normal((n, w))
            Y, Yb = rand_pd(n, rng), rand_pd(n, rng)
            assert logdet_lower_bound(V, Y, Vb, Yb) <= logdet_ratio(V, Y) + 1e-10

    def test_coeff_matrix_is_psd(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            n = rng.integers(1, 5)
            Vb = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
            _, _, C = logdet_bound_coeffs(Vb, rand_pd(n, rng))
            assert np.linalg.eigvalsh(C).min() >= -1e-12

    def test_logdet_ratio_matches_slogdet(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n = rng.integers(1, 6)
            V = rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))
            Y = rand_pd(n, rng)
            assert logdet_ratio(V, Y) == pytest.approx(
                logdet_ratio_oracle(V, Y), rel=1e-10, abs=1e-12)


class TestMatrixUpperBound:
    def test_tight_at_expansion(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            m, q, r = rng.integers(1, 4, 3)
            X = rng.standard_normal((m, q)) + 1j * rng.standard_normal((m, q))
            Y = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
            assert logdet_upper_bound(X, Y, X, Y) == pytest.approx(
                logdet_upper_truth(X, Y), abs=1e-10)

    def test_never_below_truth(self):
        rng = np.random.default_rng(15)
        for _ in range(2000):
            m, q, r = rng.integers(1, 4, 3)
            X = rng.standard_normal((m, q)) + 1j * rng.standard_normal((m, q))
            Xb = rng.standard_normal((m, q)) + 1j * rng.standard_normal((m, q))
            Y = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
            Yb = rng.standard_normal((m, r)) + 1j * rng.standard_normal((m, r))
            assert logdet_upper_bound(X, Y, Xb, Yb) >= logdet_upper_truth(X, Y) - 1e-10

    def test_truth_oracle(self):
        rng = np.random.default_rng(16)
        X = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        Y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        D = Y @ Y.conj().T + np.eye(3)
        s, d = np.linalg.slogdet(np.eye(3) + X @ X.conj().T @ np.linalg.inv(D))
        assert s > 0
        assert logdet_upper_truth(X, Y) == pytest.approx(d, rel=1e-12)


# ----------------------------------------------------------------------
# composition into QuadraticForms
# ----------------------------------------------------------------------

class TestCompose:
    def test_scalar_composition_matches_pointwise(self):
        rng = np.random.default_rng(20)
        dim = 6
        for _ in range(30):
            cols = np.array([0, 2, 5])
            vmap = ComplexAffine.from_row(
                cols, rng.standard_normal(3) + 1j * rng.standard_normal(3),
                rng.standard_normal() + 1j * rng.standard_normal())
            y_form = QuadraticForm(dim, constant=rng.uniform(0.5, 2.0))
            y_form.add_plus([1, 3], rng.standard_normal((2, 2)), rng.standard_normal(2))
            z0 = rng.standard_normal(dim)
            vbar = complex(vmap.value(z0)[0, 0])
            ybar = float(y_form.value(z0))
            q = compose_sinr_bound(dim, vbar, ybar, vmap, y_form)
            assert q.convexity() == "concave"
            for _ in range(5):
                z = rng.standard_normal(dim)
                want = sinr_lower_bound(complex(vmap.value(z)[0, 0]),
                                        float(y_form.value(z)), vbar, ybar)
                assert quadform_eval(q, z) == pytest.approx(want, rel=1e-10, abs=1e-10)
            # tight at the expansion point
            truth = np.log1p(abs(vbar) ** 2 / ybar)
            assert quadform_eval(q, z0) == pytest.approx(truth, abs=1e-10)

    def test_matrix_lower_composition_matches_pointwise(self):
        rng = np.random.default_rng(21)
        dim = 5
        n = 2
        vmap = ComplexAffine(
            np.array([0, 1, 4]),
            rng.standard_normal((n, n, 3)) + 1j * rng.standard_normal((n, n, 3)),
            rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        blocks = [ComplexAffine(
            np.array([2, 3]),
            rng.standard_normal((n, 2, 2)) + 1j * rng.standard_normal((n, 2, 2)),
            rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2)))]
        iso = QuadraticForm(dim, constant=0.4)
        iso.add_plus([2], np.array([[0.7]]))
        y_const = rand_pd(n, rng)

        def eval_Y(z):
            Y = y_const + float(iso.value(z)) * np.eye(n)
            for b in blocks:
                Bz = b.value(z)
                Y = Y + Bz @ Bz.conj().T
            return Y

        z0 = rng.standard_normal(dim)
        Vbar, Ybar = vmap.value(z0), eval_Y(z0)
        q = compose_logdet_lower(dim, Vbar, Ybar, vmap, blocks, iso, y_const)
        assert q.convexity() == "concave"
        # tightness (PSD clip is a no-op for a solidly PD coefficient matrix)
        assert quadform_eval(q, z0) == pytest.approx(logdet_ratio(Vbar, Ybar), abs=1e-9)
        for _ in range(10):
            z = rng.standard_normal(dim)
            want = logdet_lower_bound(vmap.value(z), eval_Y(z), Vbar, Ybar)
            assert quadform_eval(q, z) == pytest.approx(want, rel=1e-9, abs=1e-9)
            assert quadform_eval(q, z) <= logdet_ratio(vmap.value(z), eval_Y(z)) + 1e-9

    def test_matrix_upper_composition_matches_pointwise(self):
        rng = np.random.default_rng(22)
        dim = 6
        m = 3
        xmap = ComplexAffine(
            np.array([0, 1, 2]),
            rng.standard_normal((m, 2, 3)) + 1j * rng.standard_normal((m, 2, 3)),
            np.zeros((m, 2), dtype=complex))
        ymap = ComplexAffine(
            np.array([3, 4, 5]),
            rng.standard_normal((m, m, 3)) + 1j * rng.standard_normal((m, m, 3)),
            0.1 * np.eye(m, dtype=complex))
        z0 = rng.standard_normal(dim)
        Xbar, Ybar = xmap.value(z0), ymap.value(z0)
        for scale in (1.0, 0.5):
            q = compose_logdet_upper(dim, Xbar, Ybar, xmap, ymap, scale=scale)
            assert q.convexity() == "convex"
            assert quadform_eval(q, z0) == pytest.approx(
                scale * logdet_upper_truth(Xbar, Ybar), abs=1e-9)
            for _ in range(10):
                z = rng.standard_normal(dim)
                want = scale * logdet_upper_bound(xmap.value(z), ymap.value(z), Xbar, Ybar)
                assert quadform_eval(q, z) == pytest.approx(want, rel=1e-9, abs=1e-9)
                truth = scale * logdet_upper_truth(xmap.value(z), ymap.value(z))
                assert quadform_eval(q, z) >= truth - 1e-9


# ----------------------------------------------------------------------
# layout and subproblem containers
# ----------------------------------------------------------------------

def small_layout():
    p_slots = {(0, 0, 0, 0): 0, (0, 0, 1, 0): 1}
    x_slots = {(0, 0): 2, (0, 1): 3}
    nonneg = np.array([False, False, True, True])
    return DecisionLayout(dim=4, reals_per_p=1, p_slots=p_slots,
                          x_slots=x_slots, nonneg=nonneg)


class TestSubproblem:
    def test_layout_validation(self):
        assert small_layout().validate()
        bad = DecisionLayout(dim=4, reals_per_p=2,
                             p_slots={(0, 0, 0, 0): 0, (0, 0, 1, 0): 1},
                             x_slots={}, nonneg=np.zeros(4, bool))
        with pytest.raises(ValueError):
            bad.validate()

    def test_margins_and_self_gamma(self):
        sp = ConvexSubproblem(small_layout(), n_aux=0)
        # ||z0||^2 <= 2 - gamma
        q = QuadraticForm(4)
        q.add_plus([0], np.array([[1.0]]))
        sp.cone_from_le("power", q, rhs_cols=[sp.gamma_index], rhs_vals=[-1.0],
                        rhs_const=2.0)
        w = np.array([1.0, 0.0, 0.0, 0.0, 0.5])
        assert sp.margins(w)["power"] == pytest.approx(0.5)
        assert sp.self_gamma(w) == pytest.approx(1.0)

    def test_cone_from_ge(self):
        sp = ConvexSubproblem(small_layout(), n_aux=0)
        # concave: 3 + z1 - ||z2||^2 >= gamma
        q = QuadraticForm(4, constant=3.0)
        q.add_lin([1], [1.0])
        q.add_minus([2], np.array([[1.0]]))
        sp.cone_from_ge("rate", q, rhs_cols=[sp.gamma_index], rhs_vals=[1.0])
        w = np.array([0.0, 2.0, 1.0, 0.0, 4.0])
        # margin: (3 + 2 - 4) - 1 = 0
        assert sp.margins(w)["rate"] == pytest.approx(0.0)
        assert sp.self_gamma(w) == pytest.approx(4.0)

    def test_restricted_two_variable_lift(self):
        sp = ConvexSubproblem(small_layout(), n_aux=1)
        q = QuadraticForm(4)
        q.add_plus([0, 1], np.eye(2))
        q.add_lin([2], [1.5])
        sp.cone_from_le("mix", q, rhs_cols=[4, 5], rhs_vals=[1.0, -1.0], rhs_const=1.0)
        sp.add_lin("x_sign", [2], [1.0])
        # z = lift @ (t, u): p entries share t, x entries share u
        lift = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
        red = sp.restricted(lift, keep_nonneg_col=1)
        assert red.n_vars == 2 + 1 + 1
        w_full = np.array([0.3, 0.3, 0.2, 0.2, 0.7, 0.1])
        w_red = np.array([0.3, 0.2, 0.7, 0.1])
        assert red.margins(w_red)["mix"] == pytest.approx(sp.margins(w_full)["mix"])
        assert red.margins(w_red)["x_sign"] == pytest.approx(0.2)

    def test_gamma_sign_guard(self):
        sp = ConvexSubproblem(small_layout(), n_aux=0)
        q = QuadraticForm(4)
        q.add_plus([0], np.array([[1.0]]))
        sp.cone_from_le("bad", q, rhs_cols=[sp.gamma_index], rhs_vals=[1.0],
                        rhs_const=1.0)
        with pytest.raises(ValueError):
            sp.self_gamma(np.zeros(5))

    def test_dump_mentions_rows(self):
        sp = ConvexSubproblem(small_layout(), n_aux=0)
        q = QuadraticForm(4)
        q.add_plus([0, 1], np.eye(2))
        sp.cone_from_le("power_rrh0", q, rhs_const=1.0)
        sp.add_lin("x_nonneg", [2], [1.0])
        text = sp.dump()
        assert "power_rrh0" in text and "x_nonneg" in text
        assert "maximize" in text
