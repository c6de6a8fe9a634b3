"""JSON documents and CSV tables for MDPs, solutions, bounds and learning runs.

JSON floats are written with ``repr`` precision so documents round-trip
exactly. CSV floats use 12 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .lazy import LazyMDPSpec
from .mdp import TabularMDP

FLOAT_FMT = "{:.12g}"
SCHEMA_VERSION = 1

SWEEP_HEADER = ["eta", "lazy_frequency", "control_count", "score"]
CURVE_HEADER = ["phase", "score", "lazy_frequency"]
STATE_HEADER = ["state", "row", "col", "has_key", "door_open"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_csv(path, header: list[str], rows) -> None:
    Path(path).write_text(csv_text(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Numeric columns of a CSV written by this module."""
    header, rows = read_csv(path)
    data = np.array([[float(x) for x in row] for row in rows]) if rows else np.zeros((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def mdp_to_dict(mdp: TabularMDP) -> dict:
    s, a, t = np.nonzero(mdp.transitions)
    return {
        "kind": "tabular_mdp",
        "version": SCHEMA_VERSION,
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "gamma": mdp.gamma,
        "rewards": mdp.rewards.tolist(),
        "initial_dist": mdp.initial_dist.tolist(),
        "absorbing": np.flatnonzero(mdp.absorbing).tolist(),
        "transitions": [[int(i), int(j), int(k), float(mdp.transitions[i, j, k])] for i, j, k in zip(s, a, t)],
    }


def mdp_from_dict(doc: dict) -> TabularMDP:
    if doc.get("kind") != "tabular_mdp":
        raise ValueError("document is not a tabular_mdp")
    n_s, n_a = int(doc["n_states"]), int(doc["n_actions"])
    trans = np.zeros((n_s, n_a, n_s))
    for s, a, t, p in doc["transitions"]:
        trans[s, a, t] = p
    absorbing = np.zeros(n_s, dtype=bool)
    absorbing[list(doc.get("absorbing", []))] = True
    return TabularMDP(trans, np.array(doc["rewards"], dtype=float), float(doc["gamma"]),
                      np.array(doc["initial_dist"], dtype=float), absorbing)


def save_mdp(path, mdp: TabularMDP) -> None:
    write_json(path, mdp_to_dict(mdp))


def load_mdp(path) -> TabularMDP:
    with open(path) as fh:
        return mdp_from_dict(json.load(fh))


def spec_to_dict(spec: LazyMDPSpec) -> dict:
    return {
        "kind": "lazy_mdp_spec",
        "version": SCHEMA_VERSION,
        "base": mdp_to_dict(spec.base),
        "default_policy": spec.default_policy.tolist(),
        "eta": spec.eta,
    }


def spec_from_dict(doc: dict) -> LazyMDPSpec:
    if doc.get("kind") != "lazy_mdp_spec":
        raise ValueError("document is not a lazy_mdp_spec")
    return LazyMDPSpec(mdp_from_dict(doc["base"]), np.array(doc["default_policy"], dtype=float), float(doc["eta"]))


def load_policy(path, n_states: int, n_actions: int) -> np.ndarray:
    """A policy table from ``.npy`` or JSON (a bare nested list or ``{"policy": ...}``)."""
    path = os.fspath(path)
    if path.endswith(".npy"):
        pi = np.load(path)
    else:
        with open(path) as fh:
            doc = json.load(fh)
        pi = np.array(doc["policy"] if isinstance(doc, dict) else doc, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise ValueError(f"policy in {path} has shape {pi.shape}, expected {(n_states, n_actions)}")
    return pi


def solution_to_dict(solution, spec: LazyMDPSpec | None = None) -> dict:
    doc = {
        "kind": "lazy_solution",
        "version": SCHEMA_VERSION,
        "eta": solution.eta,
        "residual": solution.residual,
        "iterations": solution.iterations,
        "q_star": solution.q_star.tolist(),
        "pi_plus_star": solution.pi_plus_star.tolist(),
        "gap_star": solution.gap_star.tolist(),
        "control_set": np.flatnonzero(solution.control_mask).tolist(),
    }
    if spec is not None:
        doc["n_states"] = spec.n_states
        doc["n_actions"] = spec.base.n_actions
    return doc


def bounds_to_dict(bounds) -> dict:
    doc = {"kind": "eta_bounds", "version": SCHEMA_VERSION}
    doc.update(bounds.to_dict())
    return doc


def sweep_rows(result, weighted: bool = False):
    for r in result.rows:
        row = [r.eta, r.lazy_frequency, r.control_count, r.score]
        if weighted:
            row.append(r.weighted_lazy_frequency)
        yield row


def sweep_csv(result, weighted: bool = False) -> str:
    header = SWEEP_HEADER + (["weighted_lazy_frequency"] if weighted else [])
    return csv_text(header, sweep_rows(result, weighted))


def curve_rows(run):
    lazy = 1.0 - run.control_frequency if run.lazy else np.zeros_like(run.control_frequency)
    for phase, (score, lf) in enumerate(zip(run.curve, lazy)):
        yield [phase, score, lf]


def state_rows(grid, values):
    for s, (r, c, hk, do) in enumerate(grid.states):
        yield [s, r, c, hk, do, values[s]]


def state_value_csv(grid, values, column: str) -> str:
    return csv_text(STATE_HEADER + [column], state_rows(grid, values))
