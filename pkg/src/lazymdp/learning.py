"""Seeded tabular learning on base and lazy MDPs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .lazy import LazyMDPSpec, project_policy
from .mdp import TabularMDP, check_policy


@dataclass(frozen=True)
class QLearningConfig:
    """Tabular Q-learning hyperparameters.

    Training runs ``n_phases`` phases of ``episodes_per_phase`` episodes; after
    each phase the greedy policy is scored over ``eval_episodes`` episodes.
    Epsilon decays linearly from ``epsilon0`` to ``epsilon_inf`` over
    ``decay_horizon`` episodes (default: the whole run). ``gamma=None`` uses the
    MDP's discount.
    """

    alpha: float = 0.5
    epsilon0: float = 0.1
    epsilon_inf: float = 0.0
    decay_horizon: int | None = None
    gamma: float | None = None
    episodes_per_phase: int = 1000
    n_phases: int = 100
    max_episode_steps: int = 1000
    eval_episodes: int = 100
    exploring_starts: bool = False
    seed: int = 0

    def __post_init__(self):
        errors = []
        if not 0.0 < self.alpha <= 1.0:
            errors.append(f"alpha={self.alpha} outside (0, 1]")
        if not 0.0 <= self.epsilon_inf <= self.epsilon0 <= 1.0:
            errors.append(f"need 0 <= epsilon_inf <= epsilon0 <= 1, got {self.epsilon_inf}, {self.epsilon0}")
        if self.max_episode_steps < 1:
            errors.append("max_episode_steps must be >= 1")
        if self.n_phases < 1 or self.episodes_per_phase < 1:
            errors.append("n_phases and episodes_per_phase must be >= 1")
        if self.decay_horizon is not None and self.decay_horizon <= 0:
            errors.append("decay_horizon must be positive")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            errors.append(f"gamma={self.gamma} outside [0, 1)")
        if self.eval_episodes < 0:
            errors.append("eval_episodes must be >= 0")
        if errors:
            raise ValueError("invalid QLearningConfig: " + "; ".join(errors))

    @property
    def horizon(self) -> int:
        return self.decay_horizon or self.n_phases * self.episodes_per_phase

    @property
    def total_episodes(self) -> int:
        return self.n_phases * self.episodes_per_phase

    def epsilon_at(self, episode: int) -> float:
        return self.epsilon0 + (self.epsilon_inf - self.epsilon0) * min(episode / self.horizon, 1.0)

    def replace(self, **changes) -> "QLearningConfig":
        return replace(self, **changes)


@dataclass
class LearningRun:
    q: np.ndarray
    curve: np.ndarray
    control_frequency: np.ndarray
    occupancy: np.ndarray
    config: QLearningConfig
    lazy: bool = False
    default_policy: np.ndarray | None = field(default=None, repr=False)

    @property
    def final_score(self) -> float:
        return float(self.curve[-1])

    @property
    def final_control_frequency(self) -> float:
        return float(self.control_frequency[-1])

    def greedy_policy(self) -> np.ndarray:
        """Greedy policy over the learner's action space, uniform over exact ties."""
        best = self.q == self.q.max(axis=1, keepdims=True)
        return best / best.sum(axis=1, keepdims=True)

    def projected_policy(self) -> np.ndarray:
        """Greedy policy expressed in the base MDP (lazy mass routed through the default)."""
        pi = self.greedy_policy()
        return project_policy(pi, self.default_policy) if self.lazy else pi


@dataclass(frozen=True)
class _Compiled:
    ptr: np.ndarray
    nxt: np.ndarray
    cum: np.ndarray
    absorbing: np.ndarray
    init_cum: np.ndarray
    start_states: np.ndarray


def _cdf_rows(p: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(p, axis=-1)
    cdf[..., -1] = 1.0
    return np.ascontiguousarray(cdf)


def compile_kernel_inputs(mdp: TabularMDP) -> _Compiled:
    """CSR successor lists with cumulative probabilities for the kernels."""
    flat = mdp.transitions.reshape(-1, mdp.n_states)
    ptr = np.zeros(flat.shape[0] + 1, dtype=np.int64)
    nxt, cum = [], []
    for i, row in enumerate(flat):
        succ = np.flatnonzero(row > 0)
        c = np.cumsum(row[succ])
        c[-1] = 1.0
        nxt.extend(succ.tolist())
        cum.extend(c.tolist())
        ptr[i + 1] = len(nxt)
    starts = np.flatnonzero(~mdp.absorbing).astype(np.int64)
    return _Compiled(
        ptr=ptr,
        nxt=np.asarray(nxt, dtype=np.int64),
        cum=np.asarray(cum, dtype=float),
        absorbing=mdp.absorbing.astype(np.uint8),
        init_cum=_cdf_rows(mdp.initial_dist),
        start_states=starts,
    )


def _run_q_learning(mdp, config, default_policy, eta, backend):
    kern = _kernels.get_backend(backend)
    c = compile_kernel_inputs(mdp)
    n_agent = mdp.n_actions + (1 if default_policy is not None else 0)
    q = np.zeros((mdp.n_states, n_agent))
    default_cum = (
        _cdf_rows(default_policy) if default_policy is not None else np.zeros((0, mdp.n_actions))
    )
    scores = np.zeros(config.n_phases)
    control = np.zeros(config.n_phases)
    visits = np.zeros(mdp.n_states, dtype=np.int64)
    gamma = mdp.gamma if config.gamma is None else config.gamma
    out = kern.q_learning(
        c.ptr, c.nxt, c.cum, np.ascontiguousarray(mdp.rewards), c.absorbing, c.init_cum,
        c.start_states, default_cum, q, float(eta),
        float(config.alpha), float(gamma), float(config.epsilon0), float(config.epsilon_inf),
        float(config.horizon), config.n_phases, config.episodes_per_phase,
        config.max_episode_steps, config.eval_episodes, bool(config.exploring_starts),
        int(config.seed), scores, control, visits,
    )
    if out is not None:
        q[...] = out
    total = visits.sum()
    occupancy = visits / total if total else visits.astype(float)
    return LearningRun(
        q=q,
        curve=scores,
        control_frequency=control,
        occupancy=occupancy,
        config=config,
        lazy=default_policy is not None,
        default_policy=None if default_policy is None else np.asarray(default_policy, dtype=float),
    )


def q_learning(mdp: TabularMDP, config: QLearningConfig, backend: str | None = None) -> LearningRun:
    """Epsilon-greedy tabular Q-learning on ``mdp``; deterministic given ``config.seed``."""
    return _run_q_learning(mdp, config, None, 0.0, backend)


def q_learning_lazy(spec: LazyMDPSpec, config: QLearningConfig, backend: str | None = None) -> LearningRun:
    """Q-learning in the lazy-MDP of ``spec``.

    The learner sees one extra action; choosing it samples the performed action
    from the default policy and the learner observes only the next state and the
    (penalty-free) reward.
    """
    return _run_q_learning(spec.base, config, spec.default_policy, spec.eta, backend)


def learn_z(
    mdp: TabularMDP,
    target_policy: np.ndarray,
    config: QLearningConfig,
    n_episodes: int | None = None,
    backend: str | None = None,
) -> np.ndarray:
    """TD estimate of the discounted step count of ``target_policy``.

    Same update as Q-learning but on unit rewards off absorbing states and with
    the target policy's expectation in the bootstrap. Behaviour is uniform with
    probability epsilon and the target policy otherwise.
    """
    target_policy = check_policy(target_policy, mdp.n_states, mdp.n_actions, "target_policy")
    kern = _kernels.get_backend(backend)
    c = compile_kernel_inputs(mdp)
    unit = np.ascontiguousarray(np.repeat((~mdp.absorbing).astype(float)[:, None], mdp.n_actions, axis=1))
    z = np.zeros((mdp.n_states, mdp.n_actions))
    gamma = mdp.gamma if config.gamma is None else config.gamma
    n_episodes = config.total_episodes if n_episodes is None else n_episodes
    horizon = config.decay_horizon or n_episodes
    out = kern.td_evaluate(
        c.ptr, c.nxt, c.cum, unit, c.absorbing, c.init_cum, c.start_states,
        np.ascontiguousarray(target_policy), _cdf_rows(target_policy), z,
        float(config.alpha), float(gamma), float(config.epsilon0), float(config.epsilon_inf),
        float(horizon), n_episodes, config.max_episode_steps, bool(config.exploring_starts),
        int(config.seed),
    )
    if out is not None:
        z[...] = out
    return z


def occupancy(
    mdp: TabularMDP,
    policy: np.ndarray,
    n_episodes: int,
    max_episode_steps: int,
    seed: int,
    backend: str | None = None,
) -> np.ndarray:
    """Normalised Monte-Carlo state-visit frequencies of ``policy`` from the initial distribution.

    Every decision state counts once per visit and the absorbing state that
    ends an episode counts once.
    """
    policy = check_policy(policy, mdp.n_states, mdp.n_actions)
    if n_episodes < 1 or max_episode_steps < 1:
        raise ValueError("n_episodes and max_episode_steps must be >= 1")
    kern = _kernels.get_backend(backend)
    c = compile_kernel_inputs(mdp)
    visits = np.zeros(mdp.n_states, dtype=np.int64)
    kern.rollout_visits(
        c.ptr, c.nxt, c.cum, c.absorbing, c.init_cum, _cdf_rows(policy),
        n_episodes, max_episode_steps, int(seed), visits,
    )
    return visits / visits.sum()
