import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latorbit.group import (
    BorelCoords,
    GroupElement,
    adjoint_scaling,
    borel_matrix,
    borel_norm_sq,
    delta,
    diagonal_part,
    frobenius_norm,
    haar_orthogonal,
    iwasawa_decompose,
    pair_indices,
    random_element,
    squared_exp_sum,
    unipotent_part,
)

RNG = np.random.default_rng(20260822)


def balanced(vals):
    s = np.asarray(vals, dtype=float)
    return s - s.mean()


class TestGroupElement:
    def test_identity_ok(self):
        g = GroupElement(np.eye(3))
        assert g.n == 3

    def test_det_two_rejected(self):
        with pytest.raises(ValueError):
            GroupElement(2.0 * np.eye(2))

    def test_det_slightly_off_rejected(self):
        m = np.eye(2)
        m[0, 0] = 1.0 + 1e-6
        with pytest.raises(ValueError):
            GroupElement(m)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            GroupElement(np.ones((2, 3)))

    @pytest.mark.parametrize("n", [1, 7])
    def test_dimension_range(self, n):
        with pytest.raises(ValueError):
            GroupElement(np.eye(n))

    def test_immutable(self):
        g = GroupElement(np.eye(2))
        with pytest.raises(ValueError):
            g.mat[0, 0] = 5.0


class TestFrobeniusNorm:
    def test_identity(self):
        assert frobenius_norm(GroupElement(np.eye(2))) == pytest.approx(math.sqrt(2))
        assert frobenius_norm(GroupElement(np.eye(3))) == pytest.approx(math.sqrt(3))

    def test_diagonal_example(self):
        g = GroupElement(np.diag([2.0, 0.5]))
        assert frobenius_norm(g) == pytest.approx(math.sqrt(4.25), abs=1e-14)

    def test_rotation_invariance(self):
        # the norm comes from an inner product invariant under k g and g k
        for n in (2, 3, 4):
            g = random_element(n, RNG)
            k = haar_orthogonal(n, RNG)
            assert frobenius_norm(GroupElement(k @ g.mat)) == pytest.approx(
                frobenius_norm(g), rel=1e-12
            )
            assert frobenius_norm(GroupElement(g.mat @ k)) == pytest.approx(
                frobenius_norm(g), rel=1e-12
            )


class TestBorelCoords:
    def test_sum_constraint(self):
        with pytest.raises(ValueError):
            BorelCoords(s=np.array([0.5, 0.0]), t=np.array([0.0]))

    def test_t_length(self):
        with pytest.raises(ValueError):
            BorelCoords(s=np.array([0.0, 0.0]), t=np.array([0.0, 1.0]))

    def test_matrix_shape(self):
        b = BorelCoords(s=balanced([1.0, -0.25, -0.75]), t=np.array([1.0, 2.0, 3.0]))
        m = borel_matrix(b)
        # lower triangle stays zero, diagonal is exp(s)
        assert np.allclose(m[np.tril_indices(3, k=-1)], 0.0)
        assert np.allclose(np.diag(m), np.exp(b.s))
        # entry (0, 2) is exp(s_0) * t_02 with t row-major
        assert m[0, 2] == pytest.approx(math.exp(b.s[0]) * 2.0)

    def test_pair_indices_row_major(self):
        assert pair_indices(3) == [(0, 1), (0, 2), (1, 2)]
        assert pair_indices(4)[:3] == [(0, 1), (0, 2), (0, 3)]


class TestIwasawa:
    def test_upper_triangular_fixed_point(self):
        # an already upper-triangular positive-diagonal element has k = I
        b = BorelCoords(s=balanced([0.3, -0.1, -0.2]), t=np.array([0.5, -1.0, 2.0]))
        g = GroupElement(borel_matrix(b))
        iw = iwasawa_decompose(g)
        assert np.allclose(iw.k, np.eye(3), atol=1e-12)
        assert np.allclose(iw.borel.s, b.s, atol=1e-12)
        assert np.allclose(iw.borel.t, b.t, atol=1e-12)

    def test_rotation_gives_trivial_borel(self):
        th = 0.7
        k = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        iw = iwasawa_decompose(GroupElement(k))
        assert np.allclose(iw.borel.s, 0.0, atol=1e-12)
        assert np.allclose(iw.borel.t, 0.0, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_reconstruction(self, n):
        for _ in range(200):
            g = random_element(n, RNG)
            iw = iwasawa_decompose(g)
            rebuilt = iw.k @ borel_matrix(iw.borel)
            assert np.max(np.abs(rebuilt - g.mat)) < 1e-10
            # k is special orthogonal
            assert np.allclose(iw.k @ iw.k.T, np.eye(n), atol=1e-12)
            assert np.linalg.det(iw.k) == pytest.approx(1.0, abs=1e-12)


class TestDelta:
    def test_example_n3(self):
        assert delta(np.array([1.0, 0.0, -1.0])) == pytest.approx(2.0, abs=1e-14)

    def test_example_n2(self):
        assert delta(np.array([0.5, -0.5])) == pytest.approx(0.5, abs=1e-14)

    def test_rejects_unbalanced(self):
        with pytest.raises(ValueError):
            delta(np.array([1.0, 1.0]))

    @given(
        st.lists(st.floats(-5, 5), min_size=2, max_size=6).map(balanced),
    )
    def test_linear(self, s):
        # delta is linear: doubling s doubles delta
        assert delta(2.0 * np.asarray(s)) == pytest.approx(2.0 * delta(s), abs=1e-9)


class TestSquaredExpSum:
    def test_zero_vector(self):
        assert squared_exp_sum(np.zeros(3)) == pytest.approx(3.0)

    def test_example(self):
        s = np.array([math.log(2.0), -math.log(2.0)])
        assert squared_exp_sum(s) == pytest.approx(4.25, abs=1e-12)

    def test_overflow_guard(self):
        s = balanced([400.0, 0.0, -400.0])
        with pytest.raises(OverflowError):
            squared_exp_sum(s)

    def test_convexity_along_segment(self):
        # N is strictly convex on the trace-zero hyperplane
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = balanced(rng.uniform(-2, 2, size=3))
            b = balanced(rng.uniform(-2, 2, size=3))
            if np.allclose(a, b):
                continue
            mid = 0.5 * (a + b)
            assert squared_exp_sum(mid) < 0.5 * (
                squared_exp_sum(a) + squared_exp_sum(b)
            ) + 1e-12


class TestBorelNormSq:
    def test_matches_matrix_norm(self):
        rng = np.random.default_rng(11)
        for n in (2, 3, 4):
            for _ in range(100):
                s = balanced(rng.uniform(-1.5, 1.5, size=n))
                t = rng.uniform(-3, 3, size=n * (n - 1) // 2)
                b = BorelCoords(s=s, t=t)
                direct = frobenius_norm(borel_matrix(b)) ** 2
                assert borel_norm_sq(b) == pytest.approx(direct, rel=1e-12)

    def test_example(self):
        b = BorelCoords(s=np.zeros(2), t=np.array([3.0]))
        assert borel_norm_sq(b) == pytest.approx(11.0)


class TestAdjointScaling:
    def test_example_n2(self):
        s = np.array([1.0, -1.0])
        out = adjoint_scaling(s, np.array([1.0]))
        assert out[0] == pytest.approx(math.exp(2.0), rel=1e-14)

    def test_matches_conjugation(self):
        rng = np.random.default_rng(3)
        for n in (2, 3, 4):
            s = balanced(rng.uniform(-1, 1, size=n))
            t = rng.uniform(-2, 2, size=n * (n - 1) // 2)
            a = diagonal_part(s)
            conj = a @ unipotent_part(n, t) @ np.linalg.inv(a)
            expected = conj[np.triu_indices(n, k=1)]
            assert np.allclose(adjoint_scaling(s, t), expected, rtol=1e-12)


class TestHaarOrthogonal:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_special_orthogonal(self, n):
        rng = np.random.default_rng(17)
        qs = haar_orthogonal(n, rng, size=500)
        prod = np.einsum("kij,klj->kil", qs, qs)
        assert np.allclose(prod, np.eye(n), atol=1e-10)
        assert np.allclose(np.linalg.det(qs), 1.0, atol=1e-10)

    def test_column_distribution_symmetric(self):
        # first column should be uniform on the sphere: mean near zero
        rng = np.random.default_rng(23)
        qs = haar_orthogonal(3, rng, size=20000)
        col = qs[:, :, 0]
        assert np.max(np.abs(col.mean(axis=0))) < 3.0 / math.sqrt(20000 / 3.0)
