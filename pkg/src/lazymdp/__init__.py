"""Lazy-MDPs: learning when to take control over a default policy."""

from ._kernels import BACKEND
from .bounds import (
    EtaBounds,
    SweepResult,
    compute_bounds,
    empirical_eta_max,
    empirical_eta_min,
    estimate_bounds_learned,
    eta_max,
    eta_min,
    frequency_sweep,
)
from .lazy import (
    LazyMDPSpec,
    UndefinedRowError,
    build_augmented,
    cost_eval,
    lazy_gap,
    project_policy,
    q_excl_lazy,
    q_plus_from_q_excl,
    strip_lazy,
    v_plus_decomposed,
)
from .mdp import (
    ConvergenceError,
    TabularMDP,
    policy_eval_q,
    policy_eval_v,
    validate,
    value_iteration,
    z_eval,
)
from .solver import LazySolution, greedy_operator_step, lazy_greedy, solve

__version__ = "0.1.0"
