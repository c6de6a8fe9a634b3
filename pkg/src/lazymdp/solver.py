"""Optimal control in lazy-MDPs via the lazy greedy operator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lazy import LazyMDPSpec, lazy_gap, q_excl_lazy, takes_control
from .mdp import DEFAULT_MAX_ITERS, DEFAULT_TOL, TIE_TOL, ConvergenceError, value_iteration

EVAL_EVERY = 25
FINAL_ROUNDS = 10


@dataclass
class LazySolution:
    """Fixed point of the lazy greedy operator and the policy it induces.

    ``q_star`` holds base-action values in the lazy-MDP; ``pi_plus_star`` is
    over the augmented action space (lazy action last).
    """

    q_star: np.ndarray
    pi_plus_star: np.ndarray
    gap_star: np.ndarray
    control_mask: np.ndarray
    residual: float
    iterations: int
    eta: float
    residuals: list[float] = field(default_factory=list, repr=False)

    @property
    def lazy_mask(self) -> np.ndarray:
        return ~self.control_mask


def lazy_greedy(q: np.ndarray, default_policy: np.ndarray, eta, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Greedy augmented policy for a base-action Q-table.

    Takes control (uniformly over the argmax set) where the lazy-gap exceeds
    ``eta``; otherwise puts all mass on the lazy action.
    """
    q = np.asarray(q, dtype=float)
    gap = lazy_gap(q, default_policy)
    control = takes_control(gap, eta, tie_tol)
    best = q >= q.max(axis=1, keepdims=True) - tie_tol
    pi_plus = np.zeros((q.shape[0], q.shape[1] + 1))
    pi_plus[:, :-1] = np.where(control[:, None], best / best.sum(axis=1, keepdims=True), 0.0)
    pi_plus[:, -1] = np.where(control, 0.0, 1.0)
    return pi_plus


def greedy_state_values(q: np.ndarray, default_policy: np.ndarray, penalty) -> np.ndarray:
    """Value at each state of acting greedily: best base action vs deferring.

    Deferring is worth E_default[q] + penalty. Taking the larger of the two is
    the greedy value up to the tie window of :func:`lazy_greedy`.
    """
    lazy_value = np.einsum("sa,sa->s", default_policy, q) + penalty
    return np.maximum(q.max(axis=1), lazy_value)


def greedy_operator_step(q: np.ndarray, spec: LazyMDPSpec) -> np.ndarray:
    """One application of the lazy greedy operator to a base-action Q-table."""
    q = np.asarray(q, dtype=float)
    base = spec.base
    if q.shape != (base.n_states, base.n_actions):
        raise ValueError(f"q has shape {q.shape}, expected {(base.n_states, base.n_actions)}")
    v = greedy_state_values(q, spec.default_policy, spec.penalty)
    return base.rewards - spec.penalty[:, None] + base.gamma * base.expected_next(v)


def _residual(q: np.ndarray, spec: LazyMDPSpec) -> float:
    return float(np.max(np.abs(greedy_operator_step(q, spec) - q)))


def solve(
    spec: LazyMDPSpec,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    q_init: np.ndarray | None = None,
    tie_tol: float = TIE_TOL,
    eval_every: int = EVAL_EVERY,
) -> LazySolution:
    """Iterate the greedy operator from ``q_init`` (zeros) to its fixed point.

    Every ``eval_every`` sweeps the current greedy policy is evaluated exactly;
    the exact table replaces the iterate when its residual is smaller, which
    makes long-horizon problems converge in a few rounds. The run ends
    with policy iteration until the greedy policy is stable; the table with
    the smallest residual is returned. Raises
    :class:`ConvergenceError` when ``max_iters`` sweeps do not bring the
    residual below ``tol``. ``tie_tol`` widens ties toward the lazy action.
    """
    base = spec.base
    q = np.zeros((base.n_states, base.n_actions)) if q_init is None else np.array(q_init, dtype=float)
    residuals = []
    iterations = 0
    while True:
        tq = greedy_operator_step(q, spec)
        residual = float(np.max(np.abs(tq - q)))
        residuals.append(residual)
        if residual < tol:
            break
        if iterations >= max_iters:
            raise ConvergenceError(residual, iterations, "lazy greedy operator")
        q = tq
        iterations += 1
        if eval_every and iterations % eval_every == 0:
            q_exact = q_excl_lazy(spec, lazy_greedy(q, spec.default_policy, spec.penalty, tie_tol))
            if _residual(q_exact, spec) < residual:
                q = q_exact

    # finish with policy iteration: decisions whose margin is below tol still resolve exactly
    pi_plus = lazy_greedy(q, spec.default_policy, spec.penalty, tie_tol)
    for _ in range(FINAL_ROUNDS):
        q_exact = q_excl_lazy(spec, pi_plus)
        res_exact = _residual(q_exact, spec)
        if res_exact <= residual:
            q, residual = q_exact, res_exact
        new_pi = lazy_greedy(q_exact, spec.default_policy, spec.penalty, tie_tol)
        if np.array_equal(new_pi, pi_plus):
            break
        pi_plus = new_pi
    pi_plus = lazy_greedy(q, spec.default_policy, spec.penalty, tie_tol)

    gap = lazy_gap(q, spec.default_policy)
    control = pi_plus[:, -1] == 0.0
    return LazySolution(
        q_star=q,
        pi_plus_star=pi_plus,
        gap_star=gap,
        control_mask=control,
        residual=residual,
        iterations=iterations,
        eta=spec.eta,
        residuals=residuals,
    )


def oracle_solve(spec: LazyMDPSpec, tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> np.ndarray:
    """Optimal Q-table of the explicitly built augmented MDP (standard value iteration)."""
    return value_iteration(spec.augmented, tol, max_iters)


def control_set(solution: LazySolution) -> list[int]:
    return np.flatnonzero(solution.control_mask).tolist()
