import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lazymdp.bounds import eta_max
from lazymdp.gridworld import default_optimal_except
from lazymdp.lazy import LazyMDPSpec, augmented_q_direct, random_spec, v_plus_decomposed
from lazymdp.mdp import ConvergenceError, TabularMDP, random_policy, value_iteration
from lazymdp.solver import control_set, greedy_operator_step, lazy_greedy, oracle_solve, solve


def self_loop_spec(eta, gamma=0.5):
    """One state, two self-loop actions paying 1 and 0, uniform default."""
    mdp = TabularMDP(np.ones((1, 2, 1)), [[1.0, 0.0]], gamma, [1.0])
    return LazyMDPSpec(mdp, np.full((1, 2), 0.5), eta)


class TestLazyGreedy:
    uniform2 = np.full((1, 2), 0.5)

    def test_lazy_when_gap_below_penalty(self):
        np.testing.assert_array_equal(lazy_greedy(np.array([[1.0, 0.0]]), self.uniform2, 0.6), [[0, 0, 1]])

    def test_control_when_gap_above_penalty(self):
        np.testing.assert_array_equal(lazy_greedy(np.array([[1.0, 0.0]]), self.uniform2, 0.4), [[1, 0, 0]])

    def test_tie_split(self):
        pi = lazy_greedy(np.array([[1.0, 1.0, 0.0]]), np.full((1, 3), 1 / 3), 0.2)
        np.testing.assert_allclose(pi, [[0.5, 0.5, 0.0, 0.0]])

    def test_exact_tie_goes_lazy(self):
        np.testing.assert_array_equal(lazy_greedy(np.array([[1.0, 0.0]]), self.uniform2, 0.5), [[0, 0, 1]])


class TestOperator:
    def test_absorbing_only_fixed_point(self):
        mdp = TabularMDP(np.ones((2, 2, 2)) * np.eye(2)[:, None, :], np.zeros((2, 2)), 0.9, [1, 0], [True, True])
        spec = LazyMDPSpec(mdp, np.full((2, 2), 0.5), 0.0)
        assert np.all(greedy_operator_step(np.zeros((2, 2)), spec) == 0.0)
        assert np.all(solve(spec).q_star == 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_contraction(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, int(rng.integers(1, 10)), int(rng.integers(1, 5)), gamma=0.9,
                           n_absorbing=int(rng.integers(0, 2)))
        shape = (spec.n_states, spec.base.n_actions)
        q1, q2 = rng.normal(scale=3, size=shape), rng.normal(scale=3, size=shape)
        lhs = np.max(np.abs(greedy_operator_step(q1, spec) - greedy_operator_step(q2, spec)))
        assert lhs <= spec.base.gamma * np.max(np.abs(q1 - q2)) + 1e-12

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            greedy_operator_step(np.zeros((1, 3)), self_loop_spec(0.1))


class TestSolve:
    @pytest.mark.parametrize("eta", [0.0, 0.2, 0.49])
    def test_closed_form_control(self, eta):
        sol = solve(self_loop_spec(eta))
        v = (1 - eta) / 0.5
        np.testing.assert_allclose(sol.q_star, [[1 - eta + 0.5 * v, -eta + 0.5 * v]], atol=1e-10)
        assert sol.control_mask[0]

    @pytest.mark.parametrize("eta", [0.5, 0.6, 3.0])
    def test_closed_form_lazy(self, eta):
        sol = solve(self_loop_spec(eta))
        np.testing.assert_allclose(sol.q_star, [[1 - eta + 0.5, -eta + 0.5]], atol=1e-10)
        assert sol.lazy_mask[0]
        assert control_set(sol) == []

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_augmented_value_iteration(self, seed):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, 8, 3, gamma=0.9, n_absorbing=seed % 3)
        sol = solve(spec)
        oracle = oracle_solve(spec)
        np.testing.assert_allclose(sol.q_star, oracle[:, :-1], atol=1e-8)
        assert sol.residual < 1e-10

    def test_optimal_against_random_policies(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, 7, 3, gamma=0.9, n_absorbing=1)
        sol = solve(spec)
        v_star, _, _ = v_plus_decomposed(spec, sol.pi_plus_star)
        np.testing.assert_allclose(v_star, augmented_q_direct(spec, sol.pi_plus_star).max(axis=1), atol=1e-8)
        for _ in range(50):
            v, _, _ = v_plus_decomposed(spec, random_policy(rng, 7, 4))
            assert np.all(v <= v_star + 1e-9)

    def test_zero_penalty_keeps_base_optimum(self):
        rng = np.random.default_rng(12)
        spec = random_spec(rng, 6, 3, n_absorbing=1, eta=0.0)
        spec = LazyMDPSpec(spec.base, np.full((6, 3), 1 / 3), 0.0)
        q_plus = oracle_solve(spec)
        np.testing.assert_allclose(q_plus.max(axis=1), value_iteration(spec.base).max(axis=1), atol=1e-8)
        assert np.all(q_plus[:, -1] <= q_plus[:, :-1].max(axis=1) + 1e-9)

    def test_above_upper_threshold_is_all_lazy(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            spec = random_spec(rng, 6, 3, n_absorbing=1)
            hi = eta_max(spec.base, spec.default_policy)
            assert not solve(spec.with_eta(hi * 1.001 + 1e-9)).control_mask.any()

    def test_monotone_residuals(self):
        rng = np.random.default_rng(14)
        sol = solve(random_spec(rng, 10, 3, gamma=0.95), eval_every=0)
        r = np.array(sol.residuals)
        assert np.all(r[1:] <= 0.95 * r[:-1] + 1e-12)

    def test_warm_start_reaches_same_point(self):
        rng = np.random.default_rng(15)
        spec = random_spec(rng, 6, 2)
        cold = solve(spec)
        warm = solve(spec.with_eta(spec.eta + 0.01), q_init=cold.q_star)
        np.testing.assert_allclose(warm.q_star, solve(spec.with_eta(spec.eta + 0.01)).q_star, atol=1e-9)

    def test_budget_exhaustion(self, rb):
        spec = LazyMDPSpec(rb.mdp, np.full((rb.n_states, 4), 0.25), 0.01)
        with pytest.raises(ConvergenceError) as info:
            solve(spec, max_iters=1)
        assert info.value.residual > 0


def test_rivers_bridges_control_on_bridges(rb):
    default = default_optimal_except(rb, "bridge")
    sol = solve(LazyMDPSpec(rb.mdp, default, 1e-3))
    assert control_set(sol) == np.flatnonzero(rb.mask("bridge")).tolist()
