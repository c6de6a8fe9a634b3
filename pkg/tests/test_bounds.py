import numpy as np
import pytest

from lazymdp.bounds import (
    SweepError,
    bounds_from_tables,
    compute_bounds,
    empirical_eta_max,
    empirical_eta_min,
    estimate_bounds_learned,
    eta_max,
    eta_min,
    frequency_sweep,
)
from lazymdp.gridworld import default_optimal_except, default_uniform
from lazymdp.lazy import LazyMDPSpec, random_spec
from lazymdp.learning import QLearningConfig, learn_z, q_learning
from lazymdp.mdp import (
    TabularMDP,
    deterministic_policy,
    greedy_action,
    policy_eval_q,
    value_iteration,
    z_eval,
)
from lazymdp.solver import solve


def optimal_kept_under_penalty(base, eta):
    """Whether the base-optimal greedy actions stay optimal when every decision step costs ``eta``."""
    charged = base.replace(rewards=base.rewards - np.where(base.absorbing, 0.0, eta)[:, None])
    return np.array_equal(greedy_action(value_iteration(charged)), greedy_action(value_iteration(base)))


def tied_paths_mdp():
    """State 0 can cash 0.9 now or walk one step further for 1; both are worth 0.9."""
    trans = np.zeros((3, 3, 3))
    rewards = np.zeros((3, 3))
    trans[0, 0, 2] = 1.0
    rewards[0, 0] = 0.9
    trans[0, 1, 1] = 1.0
    trans[0, 2, 2] = 1.0
    trans[1, :, 2] = 1.0
    rewards[1, 0] = 1.0
    trans[2, :, 2] = 1.0
    return TabularMDP(trans, rewards, 0.9, [1, 0, 0], [False, False, True])


class TestUpperThreshold:
    def test_optimal_default_gives_zero(self, rng):
        base = random_spec(rng, 6, 3, n_absorbing=1).base
        default = deterministic_policy(greedy_action(value_iteration(base)), 3)
        assert eta_max(base, default) == pytest.approx(0.0, abs=1e-9)

    def test_myopic_single_state(self):
        base = TabularMDP(np.ones((1, 2, 1)), [[1.0, 0.0]], 0.0, [1.0])
        assert eta_max(base, np.full((1, 2), 0.5)) == 0.5

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bisection(self, seed):
        spec = random_spec(np.random.default_rng(seed), 6, 3, n_absorbing=1)
        assert eta_max(spec.base, spec.default_policy) == pytest.approx(
            empirical_eta_max(spec.base, spec.default_policy), abs=1e-8)


class TestLowerThreshold:
    def test_default_equal_to_optimal(self, rng):
        base = random_spec(rng, 6, 3, n_absorbing=1).base
        default = deterministic_policy(greedy_action(value_iteration(base)), 3)
        assert eta_min(base, default) == 0.0

    def test_default_optimal_somewhere(self, rb):
        # optimal everywhere except on the bridges
        bounds = compute_bounds(rb.mdp, default_optimal_except(rb, "bridge"))
        assert bounds.eta_min == 0.0

    def test_matches_bisection_when_optimum_is_kept(self):
        rng = np.random.default_rng(0)
        checked = 0
        for _ in range(20):
            spec = random_spec(rng, 6, 3, gamma=0.9, n_absorbing=1)
            bounds = compute_bounds(spec.base, spec.default_policy)
            if not optimal_kept_under_penalty(spec.base, bounds.eta_min):
                continue
            checked += 1
            assert bounds.eta_min == pytest.approx(
                empirical_eta_min(spec.base, spec.default_policy), abs=1e-8)
        assert checked >= 15

    def test_counterexample_when_optimum_changes(self):
        # the fifth draw from seed 0: charging every step makes a shorter route optimal
        rng = np.random.default_rng(0)
        for _ in range(5):
            spec = random_spec(rng, 6, 3, gamma=0.9, n_absorbing=1)
        bounds = compute_bounds(spec.base, spec.default_policy)
        assert not optimal_kept_under_penalty(spec.base, bounds.eta_min)
        threshold = empirical_eta_min(spec.base, spec.default_policy)
        assert abs(bounds.eta_min - threshold) > 1e-4

    def test_no_absorption_matches_bisection(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            spec = random_spec(rng, 6, 3, gamma=0.9)
            assert eta_min(spec.base, spec.default_policy) == pytest.approx(
                empirical_eta_min(spec.base, spec.default_policy), abs=1e-8)

    def test_fixed_point_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            spec = random_spec(rng, 6, 3, n_absorbing=1)
            b = compute_bounds(spec.base, spec.default_policy)
            top = b.u.max(axis=1)[b.included]
            assert b.eta_min == pytest.approx(np.min(top - b.eta_min * b.v[b.included]), abs=1e-12)

    def test_tie_sensitivity_flagged(self):
        base = tied_paths_mdp()
        b = compute_bounds(base, np.full((3, 3), 1 / 3))
        # lowest index cashes in now: u = 0.3, v = 1 - 1.3
        assert b.eta_min == pytest.approx(0.3 / 0.7, abs=1e-12)
        # the longer tied route: v = 1.9 - 1.3
        assert b.eta_min_alt == pytest.approx(0.3 / 1.6, abs=1e-12)
        assert b.tie_sensitive
        assert empirical_eta_min(base, np.full((3, 3), 1 / 3)) == pytest.approx(b.eta_min, abs=1e-8)

    def test_all_excluded_flag(self):
        q = np.array([[1.0, 0.0]])
        z = np.array([[0.0, 5.0]])
        b = bounds_from_tables(q, z, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
        assert b.all_excluded and b.eta_min == 0.0 and np.isnan(b.eta_max)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="z"):
            bounds_from_tables(np.zeros((2, 2)), np.zeros((2, 3)), np.full((2, 2), 0.5), np.full((2, 2), 0.5))


class TestEndpoints:
    @pytest.mark.parametrize("seed", range(4))
    def test_control_below_and_lazy_above(self, seed):
        spec = random_spec(np.random.default_rng(seed), 7, 3, n_absorbing=1)
        b = compute_bounds(spec.base, spec.default_policy)
        decision = ~spec.base.absorbing
        if optimal_kept_under_penalty(spec.base, b.eta_min):
            below = solve(spec.with_eta(max(b.eta_min - 1e-6, 0.0)))
            assert below.control_mask[decision].all()
        above = solve(spec.with_eta(b.eta_max + 1e-6))
        assert not above.control_mask.any()


class TestLearnedEstimates:
    def test_exact_tables_reproduce_exact_bounds(self, rb):
        default = default_uniform(rb)
        exact = compute_bounds(rb.mdp, default)
        q = value_iteration(rb.mdp)
        pi = deterministic_policy(greedy_action(q), 4)
        est = estimate_bounds_learned(q, z_eval(rb.mdp, pi), pi, default,
                                      policy_eval_q(rb.mdp, default), rb.mdp.absorbing)
        assert est.eta_min == exact.eta_min and est.eta_max == exact.eta_max

    def test_small_perturbations_move_bounds_little(self, rb):
        rng = np.random.default_rng(8)
        default = default_uniform(rb)
        exact = compute_bounds(rb.mdp, default)
        q = value_iteration(rb.mdp)
        pi = deterministic_policy(greedy_action(q), 4)
        z = z_eval(rb.mdp, pi)
        q_default = policy_eval_q(rb.mdp, default)

        def noisy(x):
            return x + rng.uniform(-1e-6, 1e-6, size=x.shape)

        est = estimate_bounds_learned(noisy(q), noisy(z), pi, default, noisy(q_default), rb.mdp.absorbing)
        assert abs(est.eta_min - exact.eta_min) < 1e-4
        assert abs(est.eta_max - exact.eta_max) < 1e-4

    def test_learned_tables_on_kdt(self, kdt):
        default = default_uniform(kdt)
        exact = compute_bounds(kdt.mdp, default)
        cfg = QLearningConfig(seed=0, exploring_starts=True, epsilon0=0.5, epsilon_inf=0.5, eval_episodes=1)
        q = q_learning(kdt.mdp, cfg).q
        pi = deterministic_policy(greedy_action(q), 4)
        z = learn_z(kdt.mdp, pi, cfg.replace(seed=1))
        est = estimate_bounds_learned(q, z, pi, default, policy_eval_q(kdt.mdp, default), kdt.mdp.absorbing)
        assert est.eta_min == pytest.approx(exact.eta_min, rel=0.1)
        assert est.eta_max == pytest.approx(exact.eta_max, rel=0.1)


class TestSweep:
    def test_below_and_above(self, kdt):
        default = default_uniform(kdt)
        b = compute_bounds(kdt.mdp, default)
        low = frequency_sweep(kdt.mdp, default, [0.0, b.eta_min * 0.5, b.eta_min * 0.99])
        high = frequency_sweep(kdt.mdp, default, [b.eta_max * 1.01, b.eta_max * 2])
        assert np.all(low.lazy_frequencies == 0.0)
        assert np.all(high.lazy_frequencies == 1.0)
        assert np.all(high.control_counts == 0)

    def test_crosses_between_bounds(self, kdt):
        default = default_uniform(kdt)
        b = compute_bounds(kdt.mdp, default)
        grid = np.geomspace(b.eta_min * 1.05, b.eta_max * 0.95, 8)
        freq = frequency_sweep(kdt.mdp, default, grid).lazy_frequencies
        assert np.all((freq > 0.0) & (freq < 1.0))
        assert np.all(np.diff(freq) >= 0.0)

    def test_workers_do_not_change_results(self, rb):
        default = default_uniform(rb)
        grid = [0.001, 0.01, 0.1, 1.0]
        one = frequency_sweep(rb.mdp, default, grid)
        two = frequency_sweep(rb.mdp, default, grid, workers=2)
        assert one.rows == two.rows

    def test_weighted_frequency_bounds(self, rb):
        rows = frequency_sweep(rb.mdp, default_uniform(rb), [0.0, 0.05, 100.0]).rows
        assert rows[0].weighted_lazy_frequency == 0.0
        assert rows[-1].weighted_lazy_frequency == 1.0

    def test_grid_must_ascend(self, rb):
        with pytest.raises(ValueError, match="ascending"):
            frequency_sweep(rb.mdp, default_uniform(rb), [0.1, 0.01])

    def test_solver_failure_names_eta(self, rb):
        with pytest.raises(SweepError) as info:
            frequency_sweep(rb.mdp, default_uniform(rb), [0.02], max_iters=1)
        assert info.value.eta == 0.02

    def test_bridge_default_threshold(self, rb):
        default = default_optimal_except(rb, "bridge")
        hi = eta_max(rb.mdp, default)
        assert hi == pytest.approx(empirical_eta_max(rb.mdp, default), abs=1e-8)
        spec = LazyMDPSpec(rb.mdp, default, 0.0)
        assert frequency_sweep(rb.mdp, default, [hi * 0.999]).lazy_frequencies[0] < 1.0
        assert not solve(spec.with_eta(hi * 1.001)).control_mask.any()
