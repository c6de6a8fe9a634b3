"""Lazy-MDP construction and the value quantities derived from it.

The lazy action is always the last column of an augmented table. Absorbing
states never pay the control penalty, so every formula here uses the per-state
penalty ``LazyMDPSpec.penalty`` (``eta`` off absorbing states, 0 on them). This
keeps the augmented MDP a valid MDP and keeps the Q-table identities exact on
absorbing rows as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mdp import (
    DEFAULT_TOL,
    STOCHASTIC_TOL,
    TIE_TOL,
    TabularMDP,
    check_policy,
    policy_eval_q,
    policy_eval_v,
    policy_matrix,
)


class UndefinedRowError(ValueError):
    """A policy row is fully lazy, so excluding the lazy action is undefined."""

    def __init__(self, states):
        self.states = list(states)
        super().__init__(f"policy is fully lazy in states {self.states}; pi_no_lazy is undefined")


@dataclass(frozen=True, eq=False)
class LazyMDPSpec:
    """A base MDP together with a default policy and a control penalty."""

    base: TabularMDP
    default_policy: np.ndarray
    eta: float

    def __post_init__(self):
        pi = check_policy(self.default_policy, self.base.n_states, self.base.n_actions, "default_policy")
        pi = pi.copy()
        pi.flags.writeable = False
        object.__setattr__(self, "default_policy", pi)
        eta = float(self.eta)
        if not eta >= 0.0:
            raise ValueError(f"eta must be >= 0, got {self.eta!r}")
        object.__setattr__(self, "eta", eta)

    @property
    def lazy_action_index(self) -> int:
        return self.base.n_actions

    @property
    def n_states(self) -> int:
        return self.base.n_states

    @cached_property
    def penalty(self) -> np.ndarray:
        """Per-state control penalty: ``eta`` off absorbing states, 0 on them."""
        pen = np.where(self.base.absorbing, 0.0, self.eta)
        pen.flags.writeable = False
        return pen

    def with_eta(self, eta: float) -> "LazyMDPSpec":
        return LazyMDPSpec(self.base, self.default_policy, eta)

    @cached_property
    def augmented(self) -> TabularMDP:
        return build_augmented(self)


def _penalty(eta, n_states: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(eta, dtype=float), (n_states,))


def build_augmented(spec: LazyMDPSpec) -> TabularMDP:
    """The lazy-MDP as an ordinary MDP with ``n_actions + 1`` actions."""
    base, pi_bar = spec.base, spec.default_policy
    n_s, n_a = base.n_states, base.n_actions
    trans = np.empty((n_s, n_a + 1, n_s))
    trans[:, :n_a] = base.transitions
    trans[:, n_a] = np.einsum("sa,sat->st", pi_bar, base.transitions)
    # the mixture row can drift from 1 by a few ulps
    trans[:, n_a] /= trans[:, n_a].sum(axis=1, keepdims=True)
    rewards = np.empty((n_s, n_a + 1))
    rewards[:, :n_a] = base.rewards - spec.penalty[:, None]
    rewards[:, n_a] = np.einsum("sa,sa->s", pi_bar, base.rewards)
    return TabularMDP(trans, rewards, base.gamma, base.initial_dist, base.absorbing)


def _check_augmented(pi_plus: np.ndarray, spec: LazyMDPSpec) -> np.ndarray:
    return check_policy(pi_plus, spec.base.n_states, spec.base.n_actions + 1, "augmented policy")


def project_policy(pi_plus: np.ndarray, default_policy: np.ndarray) -> np.ndarray:
    """Base-MDP policy induced by ``pi_plus`` when the lazy action defers to the default."""
    pi_plus = np.asarray(pi_plus, dtype=float)
    default_policy = np.asarray(default_policy, dtype=float)
    if pi_plus.shape != (default_policy.shape[0], default_policy.shape[1] + 1):
        raise ValueError(
            f"augmented policy shape {pi_plus.shape} incompatible with default {default_policy.shape}"
        )
    return pi_plus[:, :-1] + pi_plus[:, -1:] * default_policy


def strip_lazy(pi_plus: np.ndarray, states=None) -> np.ndarray:
    """Renormalise ``pi_plus`` over the base actions (the lazy action removed).

    Only the rows in ``states`` (default: all) are required to be defined; other
    fully-lazy rows are returned as NaN.
    """
    pi_plus = np.asarray(pi_plus, dtype=float)
    active = 1.0 - pi_plus[:, -1]
    undefined = active <= STOCHASTIC_TOL
    requested = np.ones(len(pi_plus), dtype=bool) if states is None else np.isin(np.arange(len(pi_plus)), states)
    if np.any(undefined & requested):
        raise UndefinedRowError(np.flatnonzero(undefined & requested).tolist())
    out = np.full(pi_plus[:, :-1].shape, np.nan)
    ok = ~undefined
    out[ok] = pi_plus[ok, :-1] / active[ok, None]
    return out


def cost_eval(spec: LazyMDPSpec, pi_plus: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Expected discounted penalties paid by ``pi_plus``.

    Solves C(s) = -penalty(s) (1 - pi_plus(lazy|s)) + gamma E_{a~pi, s'}[C(s')]
    with ``pi`` the projected policy.
    """
    pi_plus = _check_augmented(pi_plus, spec)
    pi = project_policy(pi_plus, spec.default_policy)
    p_pi, _ = policy_matrix(spec.base, pi)
    source = -spec.penalty * (1.0 - pi_plus[:, -1])
    return np.linalg.solve(np.eye(spec.n_states) - spec.base.gamma * p_pi, source)


def v_plus_decomposed(
    spec: LazyMDPSpec, pi_plus: np.ndarray, tol: float = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(V_plus, V_pi, C)`` with ``V_plus = V_pi + C``."""
    pi_plus = _check_augmented(pi_plus, spec)
    v_pi = policy_eval_v(spec.base, project_policy(pi_plus, spec.default_policy), tol)
    cost = cost_eval(spec, pi_plus, tol)
    return v_pi + cost, v_pi, cost


def q_excl_lazy(spec: LazyMDPSpec, pi_plus: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lazy-MDP value of taking each base action now and following ``pi_plus`` after."""
    v_plus, _, _ = v_plus_decomposed(spec, pi_plus, tol)
    base = spec.base
    return base.rewards - spec.penalty[:, None] + base.gamma * base.expected_next(v_plus)


def q_plus_from_q_excl(q_excl: np.ndarray, default_policy: np.ndarray, eta) -> np.ndarray:
    """Augmented Q-table: base columns unchanged, lazy column E_default[q] + eta.

    ``eta`` may be a scalar or a per-state penalty array.
    """
    q_excl = np.asarray(q_excl, dtype=float)
    default_policy = np.asarray(default_policy, dtype=float)
    if q_excl.shape != default_policy.shape:
        raise ValueError(f"q shape {q_excl.shape} does not match default policy {default_policy.shape}")
    lazy = np.einsum("sa,sa->s", default_policy, q_excl) + _penalty(eta, len(q_excl))
    return np.concatenate([q_excl, lazy[:, None]], axis=1)


def lazy_gap(q: np.ndarray, default_policy: np.ndarray) -> np.ndarray:
    """max_a q(s, a) - E_{a~default}[q(s, a)] per state (never negative)."""
    q = np.asarray(q, dtype=float)
    default_policy = np.asarray(default_policy, dtype=float)
    if q.shape != default_policy.shape:
        raise ValueError(f"q shape {q.shape} does not match default policy {default_policy.shape}")
    gap = q.max(axis=1) - np.einsum("sa,sa->s", default_policy, q)
    return np.maximum(gap, 0.0)


def takes_control(gap: np.ndarray, eta, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Strict ``gap > eta`` with ties (within ``tie_tol``) going to the lazy action."""
    return np.asarray(gap) > _penalty(eta, len(gap)) + tie_tol


def augmented_q_direct(spec: LazyMDPSpec, pi_plus: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Q-table of ``pi_plus`` evaluated directly on the explicitly built augmented MDP."""
    return policy_eval_q(spec.augmented, _check_augmented(pi_plus, spec), tol)


def random_spec(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    gamma: float = 0.9,
    n_absorbing: int = 0,
    eta: float | None = None,
) -> LazyMDPSpec:
    """Random lazy-MDP spec for property tests and benchmarks."""
    from .mdp import random_mdp, random_policy

    base = random_mdp(rng, n_states, n_actions, gamma, n_absorbing)
    default = random_policy(rng, n_states, n_actions)
    if eta is None:
        eta = float(rng.uniform(0.0, 1.0))
    return LazyMDPSpec(base, default, eta)
