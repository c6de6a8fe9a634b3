"""Finite MDPs: representation, validation, exact evaluation and value iteration.

Policies throughout the package are plain ``(n_states, n_actions)`` arrays of
action probabilities; Q- and Z-tables are ``(n_states, n_actions)`` arrays and
value tables are ``(n_states,)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000
TIE_TOL = 1e-9
STOCHASTIC_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """Raised when a fixed-point iteration does not reach its tolerance."""

    def __init__(self, residual: float, iterations: int, what: str = "iteration"):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{what} did not converge: residual {residual:.3e} after {iterations} iterations"
        )


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Dense finite MDP with state-action rewards.

    ``transitions[s, a, t]`` is P(t | s, a) and ``rewards[s, a]`` is r(s, a).
    Arrays are copied and made read-only on construction. Construction does not
    validate; call :func:`validate` for a full report.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    initial_dist: np.ndarray
    absorbing: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        trans = np.array(self.transitions, dtype=float)
        rew = np.array(self.rewards, dtype=float)
        if trans.ndim != 3 or trans.shape[0] != trans.shape[2]:
            raise ValueError(f"transitions must have shape (S, A, S), got {trans.shape}")
        n_s, n_a, _ = trans.shape
        if rew.shape != (n_s, n_a):
            raise ValueError(f"rewards must have shape {(n_s, n_a)}, got {rew.shape}")
        init = np.array(self.initial_dist, dtype=float)
        if init.shape != (n_s,):
            raise ValueError(f"initial_dist must have shape {(n_s,)}, got {init.shape}")
        if self.absorbing is None:
            absorbing = np.zeros(n_s, dtype=bool)
        else:
            absorbing = np.array(self.absorbing, dtype=bool)
        if absorbing.shape != (n_s,):
            raise ValueError(f"absorbing must have shape {(n_s,)}, got {absorbing.shape}")
        for arr in (trans, rew, init, absorbing):
            arr.flags.writeable = False
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "rewards", rew)
        object.__setattr__(self, "initial_dist", init)
        object.__setattr__(self, "absorbing", absorbing)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @cached_property
    def sparse_transitions(self) -> sp.csr_matrix:
        """Transition kernel as a CSR matrix of shape ``(S * A, S)``."""
        return sp.csr_matrix(self.transitions.reshape(-1, self.n_states))

    def replace(self, **changes) -> "TabularMDP":
        fields = dict(
            transitions=self.transitions,
            rewards=self.rewards,
            gamma=self.gamma,
            initial_dist=self.initial_dist,
            absorbing=self.absorbing,
        )
        fields.update(changes)
        return TabularMDP(**fields)

    def expected_next(self, values: np.ndarray) -> np.ndarray:
        """E_{s'~P(.|s,a)}[values(s')] as an ``(S, A)`` array."""
        return (self.sparse_transitions @ values).reshape(self.n_states, self.n_actions)


@dataclass
class ValidationReport:
    errors: list[str]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(self.errors)


def validate(mdp: TabularMDP) -> ValidationReport:
    """Check every structural invariant of ``mdp`` and list all violations."""
    errors = []
    trans, rew = mdp.transitions, mdp.rewards
    for s, a in zip(*np.nonzero(np.any(trans < 0, axis=2))):
        errors.append(f"negative transition probability at (s={s}, a={a})")
    sums = trans.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)):
        errors.append(f"transition row (s={s}, a={a}) sums to {sums[s, a]!r}, expected 1")
    for s, a in zip(*np.nonzero(~np.isfinite(rew))):
        errors.append(f"non-finite reward at (s={s}, a={a})")
    if np.any(mdp.initial_dist < 0):
        errors.append("initial_dist has negative entries")
    if abs(mdp.initial_dist.sum() - 1.0) > STOCHASTIC_TOL:
        errors.append(f"initial_dist sums to {mdp.initial_dist.sum()!r}, expected 1")
    if not 0.0 <= mdp.gamma < 1.0:
        errors.append(f"gamma={mdp.gamma!r} outside [0, 1)")
    for s in np.flatnonzero(mdp.absorbing):
        for a in range(mdp.n_actions):
            if trans[s, a, s] != 1.0:
                errors.append(f"absorbing state {s}: action {a} is not a self-loop")
            if rew[s, a] != 0.0:
                errors.append(f"absorbing state {s}: action {a} has reward {rew[s, a]!r}")
    return ValidationReport(errors)


def check_policy(pi: np.ndarray, n_states: int, n_actions: int, name: str = "policy") -> np.ndarray:
    """Return ``pi`` as a float array after checking its shape and rows."""
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise ValueError(f"{name} has shape {pi.shape}, expected {(n_states, n_actions)}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        bad = np.flatnonzero(np.any(pi < 0, axis=1) | (np.abs(pi.sum(axis=1) - 1.0) > STOCHASTIC_TOL))
        raise ValueError(f"{name} rows {bad.tolist()} are not probability distributions")
    return pi


def _check_table(q: np.ndarray, mdp: TabularMDP, name: str = "table") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"{name} has shape {q.shape}, expected {(mdp.n_states, mdp.n_actions)}")
    return q


def policy_matrix(mdp: TabularMDP, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """State-to-state kernel and expected reward under ``pi``."""
    p_pi = np.einsum("sa,sat->st", pi, mdp.transitions)
    r_pi = np.einsum("sa,sa->s", pi, mdp.rewards)
    return p_pi, r_pi


def policy_eval_v(
    mdp: TabularMDP,
    pi: np.ndarray,
    tol: float = DEFAULT_TOL,
    method: str = "direct",
    max_iters: int = DEFAULT_MAX_ITERS,
) -> np.ndarray:
    """Value function of ``pi`` by a direct linear solve or by iteration."""
    pi = check_policy(pi, mdp.n_states, mdp.n_actions)
    p_pi, r_pi = policy_matrix(mdp, pi)
    if method == "direct":
        return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * p_pi, r_pi)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    v = np.zeros(mdp.n_states)
    residual = np.inf
    for it in range(1, max_iters + 1):
        v_new = r_pi + mdp.gamma * p_pi @ v
        residual = np.max(np.abs(v_new - v))
        v = v_new
        if residual < tol:
            return v
    raise ConvergenceError(residual, max_iters, "policy evaluation")


def q_from_v(mdp: TabularMDP, v: np.ndarray) -> np.ndarray:
    return mdp.rewards + mdp.gamma * mdp.expected_next(v)


def policy_eval_q(
    mdp: TabularMDP, pi: np.ndarray, tol: float = DEFAULT_TOL, method: str = "direct"
) -> np.ndarray:
    return q_from_v(mdp, policy_eval_v(mdp, pi, tol, method))


def unit_reward_mdp(mdp: TabularMDP) -> TabularMDP:
    """Clone of ``mdp`` paying 1 in every non-absorbing state and 0 elsewhere."""
    unit = np.repeat((~mdp.absorbing).astype(float)[:, None], mdp.n_actions, axis=1)
    return mdp.replace(rewards=unit)


def z_eval(
    mdp: TabularMDP, pi: np.ndarray, tol: float = DEFAULT_TOL, method: str = "direct"
) -> np.ndarray:
    """Expected discounted number of steps before absorption, per (s, a)."""
    return policy_eval_q(unit_reward_mdp(mdp), pi, tol, method)


def bellman_optimality(mdp: TabularMDP, q: np.ndarray) -> np.ndarray:
    return mdp.rewards + mdp.gamma * mdp.expected_next(q.max(axis=1))


def greedy_action(q: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Lowest-index action within ``tie_tol`` of the row maximum."""
    q = np.asarray(q, dtype=float)
    return np.argmax(q >= q.max(axis=1, keepdims=True) - tie_tol, axis=1)


def deterministic_policy(actions: np.ndarray, n_actions: int) -> np.ndarray:
    pi = np.zeros((len(actions), n_actions))
    pi[np.arange(len(actions)), actions] = 1.0
    return pi


def greedy_from_q(q: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Policy uniform over the (tolerance-widened) argmax set of each row."""
    q = np.asarray(q, dtype=float)
    best = q >= q.max(axis=1, keepdims=True) - tie_tol
    return best / best.sum(axis=1, keepdims=True)


def value_iteration_history(
    mdp: TabularMDP,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    q_init: np.ndarray | None = None,
    polish: bool = True,
) -> tuple[np.ndarray, list[float]]:
    """Synchronous Q-value iteration; returns the table and the residual trace.

    ``residuals[k]`` is ``||T Q_k - Q_k||`` for the k-th iterate. With ``polish``
    the greedy policy of the final iterate is evaluated exactly and kept when
    its Bellman residual is smaller.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions)) if q_init is None else _check_table(q_init, mdp).copy()
    residuals = []
    for _ in range(max_iters):
        tq = bellman_optimality(mdp, q)
        residual = float(np.max(np.abs(tq - q)))
        residuals.append(residual)
        q = tq
        if residual < tol:
            break
    else:
        raise ConvergenceError(residuals[-1], max_iters, "value iteration")
    if polish:
        pi = deterministic_policy(greedy_action(q), mdp.n_actions)
        q_pi = policy_eval_q(mdp, pi)
        res_pi = float(np.max(np.abs(bellman_optimality(mdp, q_pi) - q_pi)))
        res_q = float(np.max(np.abs(bellman_optimality(mdp, q) - q)))
        if res_pi <= res_q:
            q = q_pi
    return q, residuals


def value_iteration(
    mdp: TabularMDP,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    q_init: np.ndarray | None = None,
) -> np.ndarray:
    """Optimal Q-table of ``mdp`` (sup-norm Bellman residual below ``tol``)."""
    return value_iteration_history(mdp, tol, max_iters, q_init)[0]


def sample_step(
    mdp: TabularMDP, s: int, a: int, rng: np.random.Generator
) -> tuple[int, float, bool]:
    """Sample one transition; returns ``(next_state, reward, next_is_absorbing)``."""
    if not (0 <= s < mdp.n_states and 0 <= a < mdp.n_actions):
        raise IndexError(f"(s={s}, a={a}) out of range for {mdp.n_states}x{mdp.n_actions} MDP")
    cdf = np.cumsum(mdp.transitions[s, a])
    nxt = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    nxt = min(nxt, mdp.n_states - 1)
    return nxt, float(mdp.rewards[s, a]), bool(mdp.absorbing[nxt])


def random_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    gamma: float = 0.9,
    n_absorbing: int = 0,
    branching: int | None = None,
) -> TabularMDP:
    """Random valid MDP; the last ``n_absorbing`` states are absorbing.

    ``branching`` limits the number of successors per (s, a).
    """
    trans = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            k = n_states if branching is None else min(branching, n_states)
            succ = rng.choice(n_states, size=k, replace=False)
            trans[s, a, succ] = rng.dirichlet(np.ones(k))
    rewards = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    absorbing = np.zeros(n_states, dtype=bool)
    if n_absorbing:
        absorbing[n_states - n_absorbing:] = True
        for s in np.flatnonzero(absorbing):
            trans[s] = 0.0
            trans[s, :, s] = 1.0
            rewards[s] = 0.0
    # renormalise away rounding so rows sum to 1 within 1e-12
    trans /= trans.sum(axis=2, keepdims=True)
    init = np.zeros(n_states)
    init[: max(1, n_states - n_absorbing)] = 1.0
    init /= init.sum()
    return TabularMDP(trans, rewards, gamma, init, absorbing)


def random_policy(rng: np.random.Generator, n_states: int, n_actions: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)
