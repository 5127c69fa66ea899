import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wmnmf.core import FactorizationState, HyperParams, validate_dataset
from wmnmf.graph import build_adjacency, build_laplacian
from wmnmf.updates import (
    DegenerateAlpha,
    ViewContext,
    compute_Q,
    objective_single_view,
    objective_terms,
    objective_total,
    make_context,
    update_alpha,
    update_consensus,
    update_U,
    update_V,
    update_w,
)

from oracles import grid_argmin_power, naive_objective, scalar_consensus


def random_context(r, M=6, N=10, K=3, beta=0.0, alpha=0.4, p=2.0):
    X = r.random((M, N))
    lap = build_laplacian(build_adjacency(X, knn=3)) if beta > 0 else None
    return ViewContext(
        X=X, U=r.random((M, K)) + 0.01, V=r.random((N, K)) + 0.01,
        consensus=r.random((N, K)), alpha_s=alpha, p=p, w=r.random(N) + 0.1,
        laplacian=lap, beta=beta,
    )


class TestQ:
    def test_column_sums(self):
        np.testing.assert_array_equal(compute_Q(np.array([[1, 2], [3, 4]])), [4, 6])

    def test_normalized_columns(self):
        U = np.array([[0.3, 1.0], [0.7, 0.0]])
        np.testing.assert_allclose(compute_Q(U), [1.0, 1.0])

    def test_zero(self):
        np.testing.assert_array_equal(compute_Q(np.zeros((3, 2))), [0, 0])


class TestMultiplicative:
    def scalar_ctx(self):
        return ViewContext(X=np.array([[2.0]]), U=np.array([[1.0]]), V=np.array([[1.0]]),
                           consensus=np.array([[0.0]]), alpha_s=0.0, p=2.0, w=np.array([1.0]))

    def test_scalar_u(self):
        assert update_U(self.scalar_ctx())[0, 0] == pytest.approx(2.0, abs=1e-11)

    def test_scalar_v(self):
        assert update_V(self.scalar_ctx())[0, 0] == pytest.approx(2.0, abs=1e-11)

    def test_fixed_point(self, rng):
        U, V = rng.random((5, 2)) + 0.1, rng.random((7, 2)) + 0.1
        ctx = ViewContext(X=U @ V.T, U=U, V=V, consensus=np.zeros((7, 2)), alpha_s=0.0, p=2.0,
                          w=rng.random(7) + 0.5)
        np.testing.assert_allclose(update_U(ctx), U, atol=1e-10, rtol=1e-10)
        np.testing.assert_allclose(update_V(ctx), V, atol=1e-10, rtol=1e-10)

    @pytest.mark.parametrize("beta", [0.0, 0.3])
    def test_single_update_descent(self, beta):
        for seed in range(50):
            r = np.random.default_rng(seed)
            ctx = random_context(r, beta=beta)
            before = objective_single_view(ctx)
            ctx.U = update_U(ctx)
            mid = objective_single_view(ctx)
            ctx.V = update_V(ctx)
            after = objective_single_view(ctx)
            assert mid <= before * (1 + 1e-9)
            assert after <= mid * (1 + 1e-9)

    def test_positivity_on_random_instances(self):
        for seed in range(1000):
            r = np.random.default_rng(seed)
            ctx = random_context(r, M=r.integers(1, 8), N=r.integers(6, 15), K=r.integers(1, 4),
                                 beta=float(r.choice([0.0, 0.5])), alpha=r.random(), p=1 + 4 * r.random())
            ctx.U = update_U(ctx)
            ctx.V = update_V(ctx)
            assert np.all(ctx.U > 0) and np.all(ctx.V > 0), seed

    def test_inner_sweep_descent_200(self):
        for seed in range(200):
            r = np.random.default_rng(10_000 + seed)
            ctx = random_context(r, beta=float(r.choice([0.0, 0.1])), alpha=r.random(), p=1 + 4 * r.random())
            before = objective_single_view(ctx)
            ctx.U = update_U(ctx)
            ctx.V = update_V(ctx)
            assert objective_single_view(ctx) <= before * (1 + 1e-9)


class TestAlpha:
    def test_equal_distances(self):
        np.testing.assert_allclose(update_alpha([2.0, 2.0, 2.0], 3.0), [1 / 3] * 3, atol=1e-15)

    def test_two_views_p2(self):
        np.testing.assert_allclose(update_alpha([1.0, 4.0], 2.0), [0.8, 0.2], atol=1e-15)
        np.testing.assert_allclose(grid_argmin_power([1.0, 4.0], 2.0), [0.8, 0.2], atol=1e-12)

    def test_binary_at_p1(self):
        np.testing.assert_array_equal(update_alpha([1.0, 4.0], 1.0), [1.0, 0.0])
        np.testing.assert_array_equal(update_alpha([3.0, 1.0, 1.0], 1.0), [0.0, 1.0, 0.0])

    def test_zero_distance_conventions(self):
        np.testing.assert_array_equal(update_alpha([0.0, 0.0], 3.0), [0.5, 0.5])
        np.testing.assert_array_equal(update_alpha([0.0, 2.0, 0.0], 3.0), [0.5, 0.0, 0.5])

    def test_extreme_ratios_stay_finite(self):
        a = update_alpha([1e-300, 1e300], 1.0001)
        assert np.all(np.isfinite(a)) and a[0] == pytest.approx(1.0)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 6), elements=st.floats(0, 1e6)),
           st.floats(1.0, 50.0))
    def test_simplex(self, d, p):
        a = update_alpha(d, p)
        assert np.all(a >= 0)
        assert abs(a.sum() - 1) < 1e-12

    def test_sparsity_direction(self):
        d = [0.3, 1.0, 2.5]
        maxes = [update_alpha(d, p).max() for p in (1.5, 2, 4, 8, 16)]
        assert all(b <= a for a, b in zip(maxes, maxes[1:]))
        assert np.max(np.abs(update_alpha(d, 1000.0) - 1 / 3)) < 1e-2

    def test_matches_grid_oracle(self):
        r = np.random.default_rng(7)
        for _ in range(25):
            n = r.integers(2, 4)
            d, p = r.uniform(0.1, 5.0, n), r.uniform(1.5, 5.0)
            np.testing.assert_allclose(update_alpha(d, p), grid_argmin_power(d, p), atol=1e-3)


class TestW:
    def test_equal_residuals(self):
        np.testing.assert_allclose(update_w(np.full((4, 3), 2.5)), 0.25)

    def test_ratio(self):
        np.testing.assert_allclose(update_w(np.array([[1.0], [3.0]])), [[0.75, 0.25]], atol=1e-15)
        np.testing.assert_allclose(grid_argmin_power([1.0, 3.0], 2.0), [0.75, 0.25], atol=1e-12)

    def test_zero_residual(self):
        np.testing.assert_array_equal(update_w(np.array([[0.0], [5.0]])), [[1.0, 0.0]])
        np.testing.assert_array_equal(update_w(np.array([[0.0], [5.0], [0.0]])), [[0.5, 0.0, 0.5]])

    def test_shape(self):
        assert update_w(np.ones((3, 7))).shape == (7, 3)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 8)), elements=st.floats(0, 1e6)))
    def test_simplex_rows(self, r):
        w = update_w(r)
        assert np.all(w >= 0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12, rtol=0)

    def test_larger_residual_smaller_weight(self, rng):
        r = rng.random((3, 20)) + 0.01
        w = update_w(r)
        for i in range(20):
            order = np.argsort(r[:, i])
            assert np.all(np.diff(w[i, order]) <= 0)


class TestConsensus:
    def test_single_view(self, rng):
        V, U = rng.random((5, 2)), rng.random((4, 2))
        q = compute_Q(U)
        np.testing.assert_array_equal(update_consensus([V], [q], [1.0], 5.0), V * q)

    def test_equal_weights_mean(self, rng):
        Vs = [rng.random((5, 2)) for _ in range(3)]
        qs = [rng.random(2) for _ in range(3)]
        out = update_consensus(Vs, qs, [0.2, 0.2, 0.2], 3.0)
        np.testing.assert_allclose(out, np.mean([v * q for v, q in zip(Vs, qs)], axis=0), rtol=1e-14)

    def test_two_view_weights_against_oracle(self, rng):
        Vs = [rng.random((6, 3)) for _ in range(2)]
        qs = [rng.random(3) + 0.5 for _ in range(2)]
        out = update_consensus(Vs, qs, [0.8, 0.2], 2.0)
        expected = (0.64 * Vs[0] * qs[0] + 0.04 * Vs[1] * qs[1]) / 0.68
        np.testing.assert_allclose(out, expected, rtol=1e-13)
        oracle = scalar_consensus([v * q for v, q in zip(Vs, qs)], [0.8, 0.2], 2.0)
        assert np.linalg.norm(out - oracle) < 1e-6

    def test_degenerate(self):
        with pytest.raises(DegenerateAlpha):
            update_consensus([np.ones((2, 2))], [np.ones(2)], [0.0], 2.0)

    def test_envelope(self, rng):
        Vqs = [rng.random((8, 3)) for _ in range(3)]
        out = update_consensus(Vqs, [np.ones(3)] * 3, rng.random(3), 3.0)
        stack = np.stack(Vqs)
        assert np.all(out >= stack.min(axis=0) - 1e-15)
        assert np.all(out <= stack.max(axis=0) + 1e-15)


def random_state(r, views, K, beta):
    N = views[0].shape[1]
    nv = len(views)
    W = r.random((N, nv))
    W /= W.sum(axis=1, keepdims=True)
    a = r.random(nv)
    return FactorizationState(
        U=[r.random((X.shape[0], K)) for X in views], V=[r.random((N, K)) for _ in views],
        consensus=r.random((N, K)), alpha=a / a.sum(), W=W,
    )


class TestObjective:
    def test_perfect_fit_is_zero(self, rng):
        U, V = rng.random((4, 2)), rng.random((6, 2))
        ds = validate_dataset([U @ V.T])
        s = FactorizationState(U=[U], V=[V], consensus=V * compute_Q(U), alpha=np.ones(1), W=np.ones((6, 1)))
        assert objective_total(s, ds, None, HyperParams(k=2, beta=0.0)) == pytest.approx(0.0, abs=1e-28)

    @pytest.mark.parametrize("beta", [0.0, 0.05])
    def test_matches_naive(self, beta):
        for seed in range(20):
            r = np.random.default_rng(seed)
            views = [r.random((int(r.integers(2, 5)), 7)) for _ in range(int(r.integers(1, 4)))]
            ds = validate_dataset(views)
            K = int(r.integers(1, 3))
            hp = HyperParams(k=K, p=float(r.uniform(1, 6)), beta=beta)
            laps = [build_laplacian(build_adjacency(X, knn=3)) for X in views]
            s = random_state(r, views, K, beta)
            got = objective_total(s, ds, laps, hp)
            want = naive_objective(views, s.U, s.V, s.consensus, s.alpha, s.W, hp.p, beta,
                                   [lap.A for lap in laps])
            assert got == pytest.approx(want, rel=1e-10)

    def test_beta_zero_drops_manifold(self, rng):
        views = [rng.random((3, 8)), rng.random((4, 8))]
        ds = validate_dataset(views)
        laps = [build_laplacian(build_adjacency(X, knn=3)) for X in views]
        s = random_state(rng, views, 2, 0.0)
        terms = objective_terms(s, ds, laps, HyperParams(k=2, beta=0.0))
        assert np.all(terms[:, 2] == 0)
        with_graph = objective_terms(s, ds, laps, HyperParams(k=2, beta=0.2))
        np.testing.assert_allclose(with_graph[:, :2], terms[:, :2])
        assert np.all(with_graph[:, 2] > 0)

    def test_single_views_sum_to_total(self, rng):
        views = [rng.random((3, 9)), rng.random((5, 9)), rng.random((2, 9))]
        ds = validate_dataset(views)
        laps = [build_laplacian(build_adjacency(X, knn=3)) for X in views]
        hp = HyperParams(k=2, beta=0.1)
        s = random_state(rng, views, 2, 0.1)
        parts = sum(objective_single_view(make_context(s, ds, laps, hp, i)) for i in range(3))
        assert parts == pytest.approx(objective_total(s, ds, laps, hp), rel=1e-10)
