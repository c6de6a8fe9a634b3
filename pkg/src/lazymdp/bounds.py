"""Penalty thresholds between always-control and always-lazy behaviour."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lazy import LazyMDPSpec, lazy_gap, project_policy
from .mdp import (
    DEFAULT_MAX_ITERS,
    DEFAULT_TOL,
    TIE_TOL,
    ConvergenceError,
    TabularMDP,
    check_policy,
    deterministic_policy,
    greedy_action,
    policy_eval_q,
    policy_eval_v,
    policy_matrix,
    value_iteration,
    z_eval,
)
from .solver import solve

EXCLUSION_TOL = 1e-12


@dataclass
class EtaBounds:
    """Both thresholds and the per-state terms they are built from.

    ``u`` is Q*(s, a) - E_default Q*(s, .), ``v`` is
    E_opt Z(s, .) - E_default Z(s, .) (the same for every action, stored per
    state), ``ratio`` is max_a u / (1 + v) on included states and +inf on
    excluded ones, and ``gap_default`` is the lazy-gap of the default policy's
    own Q-table.
    """

    eta_min: float
    eta_max: float
    u: np.ndarray
    v: np.ndarray
    ratio: np.ndarray
    included: np.ndarray
    gap_default: np.ndarray
    all_excluded: bool = False
    argmin_state: int | None = None
    argmax_state: int | None = None
    tie_sensitive: bool = False
    eta_min_alt: float | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "eta_min": self.eta_min,
            "eta_max": self.eta_max,
            "all_excluded": self.all_excluded,
            "argmin_state": self.argmin_state,
            "argmax_state": self.argmax_state,
            "tie_sensitive": self.tie_sensitive,
            "eta_min_alt": self.eta_min_alt,
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "ratio": [None if not np.isfinite(x) else float(x) for x in self.ratio],
            "included": self.included.tolist(),
            "gap_default": self.gap_default.tolist(),
        }


def _decision_mask(n_states: int, absorbing) -> np.ndarray:
    if absorbing is None:
        return np.ones(n_states, dtype=bool)
    return ~np.asarray(absorbing, dtype=bool)


def _eta_min_terms(q_star, z, pi_star, default_policy, decision):
    expected_default_q = np.einsum("sa,sa->s", default_policy, q_star)
    u = q_star - expected_default_q[:, None]
    v = np.einsum("sa,sa->s", pi_star, z) - np.einsum("sa,sa->s", default_policy, z)
    top = u.max(axis=1)
    # exact zeros matter: a default that is optimal somewhere must give 0
    top = np.where(top < TIE_TOL, 0.0, top)
    included = decision & (v > -1.0 + EXCLUSION_TOL)
    ratio = np.full(len(top), np.inf)
    ratio[included] = top[included] / (1.0 + v[included])
    return u, v, ratio, included


def bounds_from_tables(
    q_star: np.ndarray,
    z: np.ndarray,
    pi_star: np.ndarray,
    default_policy: np.ndarray,
    q_default: np.ndarray | None = None,
    absorbing: np.ndarray | None = None,
) -> EtaBounds:
    """Evaluate both threshold formulas on the given tables.

    Absorbing states (if given) are not decision states and are left out of
    both the min and the max. Without ``q_default`` the upper bound is NaN.
    """
    q_star = np.asarray(q_star, dtype=float)
    z = np.asarray(z, dtype=float)
    n_s, n_a = q_star.shape
    for name, arr in (("z", z), ("pi_star", pi_star), ("default_policy", default_policy)):
        if np.shape(arr) != (n_s, n_a):
            raise ValueError(f"{name} has shape {np.shape(arr)}, expected {(n_s, n_a)}")
    pi_star = check_policy(pi_star, n_s, n_a, "pi_star")
    default_policy = check_policy(default_policy, n_s, n_a, "default_policy")
    decision = _decision_mask(n_s, absorbing)
    if absorbing is not None and len(decision) != n_s:
        raise ValueError("absorbing mask length does not match the tables")

    u, v, ratio, included = _eta_min_terms(q_star, z, pi_star, default_policy, decision)
    all_excluded = not included.any()
    if all_excluded:
        eta_lo, argmin = 0.0, None
    else:
        argmin = int(np.argmin(ratio))
        eta_lo = max(float(ratio[argmin]), 0.0)

    if q_default is None:
        gap_default = np.full(n_s, np.nan)
        eta_hi, argmax = float("nan"), None
    else:
        q_default = np.asarray(q_default, dtype=float)
        if q_default.shape != (n_s, n_a):
            raise ValueError(f"q_default has shape {q_default.shape}, expected {(n_s, n_a)}")
        gap_default = lazy_gap(q_default, default_policy)
        masked = np.where(decision, gap_default, -np.inf)
        if decision.any():
            argmax = int(np.argmax(masked))
            eta_hi = float(masked[argmax])
        else:
            eta_hi, argmax = 0.0, None

    return EtaBounds(
        eta_min=eta_lo,
        eta_max=eta_hi,
        u=u,
        v=v,
        ratio=ratio,
        included=included,
        gap_default=gap_default,
        all_excluded=all_excluded,
        argmin_state=argmin,
        argmax_state=argmax,
    )


def eta_max(base: TabularMDP, default_policy: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Largest lazy-gap of the default policy's Q-table over decision states."""
    default_policy = check_policy(default_policy, base.n_states, base.n_actions, "default_policy")
    gap = lazy_gap(policy_eval_q(base, default_policy, tol), default_policy)
    gap = gap[~base.absorbing]
    return float(gap.max()) if gap.size else 0.0


def _optimal_tables(base, q_star, tol, highest_index=False):
    if highest_index:
        flipped = q_star[:, ::-1]
        actions = base.n_actions - 1 - greedy_action(flipped)
    else:
        actions = greedy_action(q_star)
    pi_star = deterministic_policy(actions, base.n_actions)
    return q_star, pi_star, z_eval(base, pi_star, tol)


def compute_bounds(
    base: TabularMDP,
    default_policy: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> EtaBounds:
    """Exact thresholds for ``base`` and ``default_policy``.

    The optimal policy used for the step-count table is greedy with
    lowest-index tie-breaking; the lower bound is recomputed with
    highest-index tie-breaking and ``tie_sensitive`` flags a difference.
    """
    default_policy = check_policy(default_policy, base.n_states, base.n_actions, "default_policy")
    q_star = value_iteration(base, tol, max_iters)
    _, pi_star, z = _optimal_tables(base, q_star, tol)
    q_default = policy_eval_q(base, default_policy, tol)
    out = bounds_from_tables(q_star, z, pi_star, default_policy, q_default, base.absorbing)
    _, pi_alt, z_alt = _optimal_tables(base, q_star, tol, highest_index=True)
    if not np.array_equal(pi_alt, pi_star):
        alt = bounds_from_tables(q_star, z_alt, pi_alt, default_policy, None, base.absorbing)
        out.eta_min_alt = alt.eta_min
        out.tie_sensitive = abs(alt.eta_min - out.eta_min) > TIE_TOL
    else:
        out.eta_min_alt = out.eta_min
    return out


def eta_min(base: TabularMDP, default_policy: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Penalty below which the optimal lazy policy never defers."""
    return compute_bounds(base, default_policy, tol).eta_min


def estimate_bounds_learned(
    q_learned: np.ndarray,
    z_learned: np.ndarray,
    pi_star_est: np.ndarray,
    default_policy: np.ndarray,
    q_default: np.ndarray | None = None,
    absorbing: np.ndarray | None = None,
) -> EtaBounds:
    """Threshold estimates from approximate tables (e.g. learned ones).

    ``q_default`` is an estimate of the default policy's Q-table; the upper
    bound needs it and is NaN when it is missing.
    """
    return bounds_from_tables(q_learned, z_learned, pi_star_est, default_policy, q_default, absorbing)


@dataclass
class SweepRow:
    eta: float
    lazy_frequency: float
    control_count: int
    score: float
    weighted_lazy_frequency: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    n_decision_states: int

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.rows])

    @property
    def lazy_frequencies(self) -> np.ndarray:
        return np.array([r.lazy_frequency for r in self.rows])

    @property
    def control_counts(self) -> np.ndarray:
        return np.array([r.control_count for r in self.rows])

    @property
    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rows])


class SweepError(RuntimeError):
    def __init__(self, eta: float, cause: Exception):
        self.eta = eta
        self.cause = cause
        super().__init__(f"solve failed at eta={eta!r}: {cause}")


def discounted_occupancy(base: TabularMDP, pi: np.ndarray) -> np.ndarray:
    """Normalised discounted state occupancy of ``pi`` from the initial distribution."""
    p_pi, _ = policy_matrix(base, pi)
    d = np.linalg.solve((np.eye(base.n_states) - base.gamma * p_pi).T, base.initial_dist)
    return d / d.sum()


def _sweep_point(spec: LazyMDPSpec, tol: float, max_iters: int) -> SweepRow:
    try:
        sol = solve(spec, tol, max_iters)
    except ConvergenceError as exc:
        raise SweepError(spec.eta, exc) from exc
    base = spec.base
    decision = ~base.absorbing
    n_dec = int(decision.sum())
    control = sol.control_mask & decision
    count = int(control.sum())
    pi = project_policy(sol.pi_plus_star, spec.default_policy)
    score = float(base.initial_dist @ policy_eval_v(base, pi, tol))
    occ = discounted_occupancy(base, pi)[decision]
    mass = occ.sum()
    weighted = float(occ[~control[decision]].sum() / mass) if mass > 0 else float("nan")
    freq = 1.0 - count / n_dec if n_dec else 1.0
    return SweepRow(spec.eta, freq, count, score, weighted)


def frequency_sweep(
    base: TabularMDP,
    default_policy: np.ndarray,
    eta_grid,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    workers: int = 1,
) -> SweepResult:
    """Solve the lazy-MDP at every grid penalty and record how lazy it is.

    Frequencies are over decision (non-absorbing) states. Every point is
    solved from a zero table, so the result does not depend on ``workers``.
    """
    grid = [float(x) for x in eta_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("eta_grid must be sorted ascending")
    template = LazyMDPSpec(base, default_policy, 0.0)
    specs = [template.with_eta(eta) for eta in grid]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda s: _sweep_point(s, tol, max_iters), specs))
    else:
        rows = [_sweep_point(s, tol, max_iters) for s in specs]
    return SweepResult(rows, int((~base.absorbing).sum()))


def _control_count(spec: LazyMDPSpec, tol: float, q_init=None) -> tuple[int, np.ndarray]:
    # strict comparison: the oracle measures the exact threshold, not the tie convention
    sol = solve(spec, tol, q_init=q_init, tie_tol=0.0)
    return int((sol.control_mask & ~spec.base.absorbing).sum()), sol.q_star


def _bisect(spec: LazyMDPSpec, predicate, lo: float, hi: float, precision: float, tol: float) -> float:
    """Boundary between ``predicate`` true at ``lo`` and false at ``hi``."""
    q = None
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        count, q = _control_count(spec.with_eta(mid), tol, q)
        if predicate(count):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def empirical_eta_max(
    base: TabularMDP, default_policy: np.ndarray, precision: float = 1e-10, tol: float = DEFAULT_TOL
) -> float:
    """Smallest penalty at which the solved lazy-MDP is lazy in every decision state."""
    spec = LazyMDPSpec(base, default_policy, 0.0)
    if _control_count(spec, tol)[0] == 0:
        return 0.0
    hi = 1.0
    while _control_count(spec.with_eta(hi), tol)[0] > 0:
        hi *= 2.0
    return _bisect(spec, lambda c: c > 0, 0.0, hi, precision, tol)


def empirical_eta_min(
    base: TabularMDP, default_policy: np.ndarray, precision: float = 1e-10, tol: float = DEFAULT_TOL
) -> float:
    """Largest penalty at which the solved lazy-MDP takes control in every decision state."""
    spec = LazyMDPSpec(base, default_policy, 0.0)
    n_dec = int((~base.absorbing).sum())
    if _control_count(spec, tol)[0] < n_dec:
        return 0.0
    hi = 1.0
    while _control_count(spec.with_eta(hi), tol)[0] == n_dec:
        hi *= 2.0
    return _bisect(spec, lambda c: c == n_dec, 0.0, hi, precision, tol)
