"""Per-state importance measures: action-gap, importance advice and lazy-gap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lazy import LazyMDPSpec
from .mdp import DEFAULT_TOL
from .solver import solve


@dataclass
class ImportanceMap:
    name: str
    values: np.ndarray
    eta: float | None = None

    def support(self, threshold: float = 0.0) -> np.ndarray:
        """States whose value is strictly above ``threshold``."""
        return self.values > threshold

    def slices(self, grid) -> dict[tuple[bool, bool], np.ndarray]:
        """Values split by the (has_key, door_open) slices of a compiled grid."""
        return {sl: self.values[grid.slice_mask(*sl)] for sl in grid.slices}


def _table(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2:
        raise ValueError(f"expected a (states, actions) table, got shape {q.shape}")
    return q


def action_gap(q: np.ndarray) -> ImportanceMap:
    """Best minus second-best action value; 0 when the maximum is tied or only one action exists."""
    q = _table(q)
    if q.shape[1] < 2:
        return ImportanceMap("action_gap", np.zeros(q.shape[0]))
    top2 = np.sort(q, axis=1)[:, -2:]
    return ImportanceMap("action_gap", top2[:, 1] - top2[:, 0])


def importance_advice(q: np.ndarray) -> ImportanceMap:
    """Best minus worst action value."""
    q = _table(q)
    return ImportanceMap("importance_advice", q.max(axis=1) - q.min(axis=1))


def lazy_gap_importance(spec: LazyMDPSpec, tol: float = DEFAULT_TOL, solution=None) -> ImportanceMap:
    """Lazy-gap of the solved lazy-MDP; its support above ``eta`` is the control set."""
    sol = solution if solution is not None else solve(spec, tol)
    return ImportanceMap("lazy_gap", sol.gap_star.copy(), eta=spec.eta)
