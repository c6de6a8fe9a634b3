"""Command-line harness: ``lazymdp {solve,eta-bounds,sweep,explore,importance,validate}``.

Settings come from built-in defaults, then an optional INI file
(``--config``, section ``[experiment]``), then command-line flags. Everything
is resolved and checked before any computation starts, so a bad config never
leaves partial outputs behind.

Exit codes: 0 ok, 2 config or input error, 3 non-convergence, 4 a failed
assertion in the sweep report.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as lio
from .bounds import SweepError, compute_bounds, frequency_sweep
from .gridworld import (
    CANONICAL_MAPS,
    CompiledGrid,
    GridParseError,
    StateOverflowError,
    compile_grid,
    default_optimal_except,
    default_second_best,
    load_map,
    second_best_actions,
)
from .importance import action_gap, importance_advice, lazy_gap_importance
from .lazy import LazyMDPSpec
from .learning import QLearningConfig, q_learning_lazy
from .mdp import DEFAULT_MAX_ITERS, DEFAULT_TOL, ConvergenceError, TabularMDP, check_policy, value_iteration
from .render import heatmap_panels, render_mask, render_values, side_by_side
from .solver import solve

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_REPORT = 0, 2, 3, 4
COMMANDS = ("solve", "eta-bounds", "sweep", "explore", "importance", "validate")
CONFIG_SECTION = "experiment"
ENDPOINT_MARGIN = 1e-9
PROBE_FACTOR = 1e-3

# Per-command fallbacks for settings the user did not give.
COMMAND_DEFAULTS = {
    "solve": {"env": "rivers_bridges"},
    "eta-bounds": {"env": "rivers_bridges"},
    "sweep": {"env": "rivers_bridges"},
    "explore": {"env": "kdt_apple", "eta_grid": "0,0.03,0.05", "seeds": "0:100"},
    "importance": {"env": "kdt", "eta_grid": "0.03,0.05"},
    "validate": {"env": "rivers_bridges"},
}

# Keys accepted in the INI file and their parsers.
KEYS = {
    "env": str,
    "default": str,
    "eta": float,
    "eta_grid": str,
    "gamma": float,
    "tol": float,
    "max_iters": int,
    "seed": int,
    "seeds": str,
    "out": str,
    "workers": int,
    "phases": int,
    "episodes_per_phase": int,
    "max_episode_steps": int,
    "eval_episodes": int,
    "alpha": float,
    "epsilon0": float,
}


class ConfigError(ValueError):
    pass


@dataclass
class Environment:
    mdp: TabularMDP
    grid: CompiledGrid | None
    name: str


@dataclass
class ExperimentConfig:
    command: str
    env: Environment
    default_name: str
    default_policy: np.ndarray
    etas: list[float]
    eta_is_grid: bool
    tol: float
    max_iters: int
    seeds: list[int]
    out: Path | None
    workers: int
    learning: QLearningConfig
    raw: dict = field(default_factory=dict)


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with an [experiment] section")
    common.add_argument("--env", help="canonical map name, .map file or .json MDP document")
    common.add_argument(
        "--default",
        help="default policy: uniform | second-best | optimal-except[:MASK] | file:PATH",
    )
    etas = common.add_mutually_exclusive_group()
    etas.add_argument("--eta", type=float, help="single penalty")
    etas.add_argument("--eta-grid", dest="eta_grid", help="comma list, lin:a:b:n or log:a:b:n")
    common.add_argument("--gamma", type=float, help="override the discount factor")
    common.add_argument("--tol", type=float, help="solver tolerance")
    common.add_argument("--max-iters", dest="max_iters", type=int, help="solver iteration cap")
    seeds = common.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, help="single seed")
    seeds.add_argument("--seeds", help="seed range A:B (B exclusive) or comma list")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="parallel workers")
    common.add_argument("--phases", type=int, help="learning phases (explore)")
    common.add_argument("--episodes-per-phase", dest="episodes_per_phase", type=int)
    common.add_argument("--max-episode-steps", dest="max_episode_steps", type=int)
    common.add_argument("--eval-episodes", dest="eval_episodes", type=int)
    common.add_argument("--alpha", type=float, help="learning rate (explore)")
    common.add_argument("--epsilon0", type=float, help="initial exploration rate (explore)")

    parser = argparse.ArgumentParser(prog="lazymdp", description="Tabular lazy-MDP experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve one lazy-MDP and export its control set",
        "eta-bounds": "exact penalty thresholds and per-state diagnostics",
        "sweep": "lazy frequency and score over a penalty grid",
        "explore": "Q-learning in the lazy-MDP over many seeds",
        "importance": "action-gap, importance advice and lazy-gap maps",
        "validate": "check a config and environment without computing",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _read_ini(path: str) -> dict:
    ini = configparser.ConfigParser()
    try:
        with open(path) as fh:
            ini.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not ini.has_section(CONFIG_SECTION):
        raise ConfigError(f"config {path} has no [{CONFIG_SECTION}] section")
    out = {}
    for key, value in ini.items(CONFIG_SECTION):
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"config {path}: unknown key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"config {path}: bad value for {key}: {value!r}") from exc
    if "eta" in out and "eta_grid" in out:
        raise ConfigError(f"config {path}: eta and eta_grid are mutually exclusive")
    if "seed" in out and "seeds" in out:
        raise ConfigError(f"config {path}: seed and seeds are mutually exclusive")
    return out


def merge_settings(args: argparse.Namespace) -> dict:
    """Command defaults, then the INI file, then explicit flags."""
    layers = [dict(COMMAND_DEFAULTS[args.command])]
    if args.config:
        layers.append(_read_ini(args.config))
    layers.append({k: v for k, v in vars(args).items() if k in KEYS and v is not None})
    settings: dict = {}
    for layer in layers:
        # setting one side of an exclusive pair displaces the other from lower layers
        for a, b in (("eta", "eta_grid"), ("seed", "seeds")):
            if a in layer:
                settings.pop(b, None)
            if b in layer:
                settings.pop(a, None)
        settings.update(layer)
    return settings


def parse_eta_grid(text: str) -> list[float]:
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ConfigError("eta grid needs at least one point")
            if kind == "lin":
                grid = np.linspace(a, b, n)
            else:
                if a <= 0 or b <= 0:
                    raise ConfigError("log eta grid needs positive endpoints")
                grid = np.geomspace(a, b, n)
            values = [float(x) for x in grid]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad eta grid {text!r}") from exc
    if not values:
        raise ConfigError("eta grid is empty")
    if any(not np.isfinite(x) for x in values):
        raise ConfigError("eta grid has non-finite values")
    return sorted(values)


def parse_seeds(settings: dict) -> list[int]:
    if "seed" in settings:
        return [int(settings["seed"])]
    text = str(settings.get("seeds", "0")).strip()
    try:
        if ":" in text:
            a, b = (int(x) for x in text.split(":"))
            seeds = list(range(a, b))
        else:
            seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed range {text!r}") from exc
    if not seeds:
        raise ConfigError(f"seed range {text!r} is empty")
    if any(s < 0 for s in seeds):
        raise ConfigError("seeds must be non-negative")
    return seeds


def load_environment(name: str, gamma: float | None) -> Environment:
    if name.endswith(".json"):
        try:
            mdp = lio.load_mdp(name)
        except OSError as exc:
            raise ConfigError(f"cannot read {name}: {exc.strerror}") from exc
        except (ValueError, KeyError, TypeError, IndexError) as exc:
            raise ConfigError(f"invalid MDP document {name}: {exc}") from exc
        if gamma is not None:
            if not 0.0 <= gamma < 1.0:
                raise ConfigError(f"gamma={gamma} outside [0, 1)")
            mdp = TabularMDP(mdp.transitions, mdp.rewards, gamma, mdp.initial_dist, mdp.absorbing)
        return Environment(mdp, None, Path(name).stem)
    if name not in CANONICAL_MAPS and not Path(name).is_file():
        known = ", ".join(CANONICAL_MAPS)
        raise ConfigError(f"environment {name!r} is neither a file nor a canonical map ({known})")
    try:
        spec = load_map(name, gamma=gamma)
        grid = compile_grid(spec)
    except GridParseError as exc:
        raise ConfigError(f"{name}: {exc}") from exc
    except StateOverflowError as exc:
        raise ConfigError(str(exc)) from exc
    return Environment(grid.mdp, grid, spec.name)


def make_default(choice: str, env: Environment, tol: float) -> np.ndarray:
    mdp = env.mdp
    if choice == "uniform":
        return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    if choice == "second-best":
        if env.grid is not None:
            return default_second_best(env.grid)
        actions = second_best_actions(value_iteration(mdp, tol))
        pi = np.zeros((mdp.n_states, mdp.n_actions))
        pi[np.arange(mdp.n_states), actions] = 1.0
        return pi
    if choice == "optimal-except" or choice.startswith("optimal-except:"):
        if env.grid is None:
            raise ConfigError("optimal-except needs a gridworld environment")
        mask = choice.partition(":")[2] or "bridge"
        try:
            return default_optimal_except(env.grid, mask)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"unknown mask {mask!r} for optimal-except") from exc
    if choice.startswith("file:"):
        path = choice[len("file:"):]
        try:
            pi = lio.load_policy(path, mdp.n_states, mdp.n_actions)
            return check_policy(pi, mdp.n_states, mdp.n_actions, "default policy")
        except OSError as exc:
            raise ConfigError(f"cannot read default policy {path}: {exc.strerror}") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid default policy {path}: {exc}") from exc
    raise ConfigError(f"unknown default policy {choice!r}")


def resolve(args: argparse.Namespace) -> ExperimentConfig:
    """Turn parsed flags into a checked config; raises :class:`ConfigError`."""
    s = merge_settings(args)
    tol = float(s.get("tol", DEFAULT_TOL))
    max_iters = int(s.get("max_iters", DEFAULT_MAX_ITERS))
    workers = int(s.get("workers", 1))
    if not tol > 0:
        raise ConfigError("tol must be positive")
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    if "eta" in s:
        etas, is_grid = [float(s["eta"])], False
        if not np.isfinite(etas[0]):
            raise ConfigError("eta must be finite")
    elif "eta_grid" in s:
        etas, is_grid = parse_eta_grid(s["eta_grid"]), True
    else:
        etas, is_grid = [], False
    if args.command == "solve" and len(etas) != 1:
        raise ConfigError("solve needs exactly one --eta")
    if args.command == "sweep" and not etas:
        raise ConfigError("sweep needs --eta-grid")
    seeds = parse_seeds(s)
    try:
        learning = QLearningConfig(
            alpha=float(s.get("alpha", 0.5)),
            epsilon0=float(s.get("epsilon0", 0.1)),
            n_phases=int(s.get("phases", 100)),
            episodes_per_phase=int(s.get("episodes_per_phase", 1000)),
            max_episode_steps=int(s.get("max_episode_steps", 1000)),
            eval_episodes=int(s.get("eval_episodes", 100)),
        )
    except ValueError as exc:
        raise ConfigError(f"learning config: {exc}") from exc
    out = Path(s["out"]) if "out" in s else None
    if out is not None and out.exists() and not out.is_dir():
        raise ConfigError(f"output path {out} exists and is not a directory")

    env = load_environment(str(s["env"]), s.get("gamma"))
    default_name = str(s.get("default", "uniform"))
    default = make_default(default_name, env, tol)
    if args.command == "explore" and env.grid is None:
        raise ConfigError("explore needs a gridworld environment")
    return ExperimentConfig(
        command=args.command, env=env, default_name=default_name, default_policy=default,
        etas=etas, eta_is_grid=is_grid, tol=tol, max_iters=max_iters, seeds=seeds,
        out=out, workers=workers, learning=learning, raw=s,
    )


# ---------------------------------------------------------------- outputs


class Outputs:
    """Collects files in memory and writes them only once a command succeeds."""

    def __init__(self, out: Path | None):
        self.out = out
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def add_json(self, name: str, doc: dict) -> None:
        self.files[name] = json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def flush(self) -> None:
        if self.out is None or not self.files:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        for name in sorted(self.files):
            (self.out / name).write_text(self.files[name])


def _eta_tag(eta: float) -> str:
    return f"{eta:g}"


def _state_header(env: Environment) -> list[str]:
    return lio.STATE_HEADER if env.grid is not None else ["state"]


def _state_prefix(env: Environment, s: int) -> list:
    if env.grid is None:
        return [s]
    r, c, hk, do = env.grid.states[s]
    return [s, r, c, hk, do]


def _config_doc(cfg: ExperimentConfig) -> dict:
    # the output directory is left out so reruns elsewhere stay byte-identical
    doc = {k: v for k, v in cfg.raw.items() if k != "out"}
    doc["command"] = cfg.command
    return doc


# ---------------------------------------------------------------- commands


def cmd_solve(cfg: ExperimentConfig, out: Outputs) -> int:
    env, eta = cfg.env, cfg.etas[0]
    spec = LazyMDPSpec(env.mdp, cfg.default_policy, eta)
    sol = solve(spec, cfg.tol, cfg.max_iters)
    doc = lio.solution_to_dict(sol, spec)
    doc["config"] = _config_doc(cfg)
    out.add_json("solution.json", doc)
    control = np.flatnonzero(sol.control_mask)
    rows = [_state_prefix(env, s) + [sol.gap_star[s]] for s in control]
    out.add("control_set.csv", lio.csv_text(_state_header(env) + ["lazy_gap"], rows))
    if env.grid is not None:
        text = render_values(env.grid, sol.gap_star, f"lazy-gap at eta={eta:g}")
        text += "\n" + render_mask(env.grid, sol.control_mask, f"control mask at eta={eta:g}")
        out.add("heatmaps.txt", text)
        print(text, end="")
    n_dec = int((~env.mdp.absorbing).sum())
    print(f"eta={eta:g} control states {len(control)}/{n_dec} residual {sol.residual:.3e} "
          f"iterations {sol.iterations}")
    return EXIT_OK


def cmd_eta_bounds(cfg: ExperimentConfig, out: Outputs) -> int:
    env = cfg.env
    b = compute_bounds(env.mdp, cfg.default_policy, cfg.tol, cfg.max_iters)
    doc = lio.bounds_to_dict(b)
    doc["config"] = _config_doc(cfg)
    out.add_json("bounds.json", doc)
    header = _state_header(env) + ["u", "v", "ratio", "included", "gap_default"]
    rows = [
        _state_prefix(env, s) + [b.u[s], b.v[s], b.ratio[s], bool(b.included[s]), b.gap_default[s]]
        for s in range(env.mdp.n_states)
    ]
    out.add("bounds_states.csv", lio.csv_text(header, rows))
    print(f"eta_min {b.eta_min:.12g}")
    print(f"eta_max {b.eta_max:.12g}")
    if b.all_excluded:
        print("note: every decision state was excluded from the lower bound")
    if b.tie_sensitive:
        print(f"note: lower bound depends on tie-breaking (alternative {b.eta_min_alt:.12g})")
    return EXIT_OK


def endpoint_report(result, bounds, probes) -> tuple[bool, str]:
    """Check the two endpoint properties on the grid rows and two probe points."""
    lines, ok = [], True
    lines.append(f"eta_min {bounds.eta_min:.12g}")
    lines.append(f"eta_max {bounds.eta_max:.12g}")
    points = [("grid", r.eta, r.lazy_frequency) for r in result.rows]
    points += [("probe", r.eta, r.lazy_frequency) for r in probes.rows]
    checked = 0
    for kind, eta, freq in points:
        if eta < bounds.eta_min - ENDPOINT_MARGIN:
            good = freq == 0.0
            what = "below eta_min: lazy_frequency == 0"
        elif eta > bounds.eta_max + ENDPOINT_MARGIN:
            good = freq == 1.0
            what = "above eta_max: lazy_frequency == 1"
        else:
            continue
        checked += 1
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'} {kind} eta={eta:.12g} {what} (got {freq:.12g})")
    if checked == 0:
        lines.append("no grid point or probe lies outside [eta_min, eta_max]")
    lines.append("RESULT " + ("PASS" if ok else "FAIL"))
    return ok, "\n".join(lines) + "\n"


def cmd_sweep(cfg: ExperimentConfig, out: Outputs) -> int:
    env = cfg.env
    bounds = compute_bounds(env.mdp, cfg.default_policy, cfg.tol, cfg.max_iters)
    result = frequency_sweep(env.mdp, cfg.default_policy, cfg.etas, cfg.tol, cfg.max_iters, cfg.workers)
    probe_etas = [bounds.eta_max * (1 + PROBE_FACTOR) + ENDPOINT_MARGIN * 10]
    if bounds.eta_min > 0:
        probe_etas.insert(0, bounds.eta_min * (1 - PROBE_FACTOR))
    probes = frequency_sweep(env.mdp, cfg.default_policy, probe_etas, cfg.tol, cfg.max_iters)
    out.add("sweep.csv", lio.sweep_csv(result, weighted=True))
    ok, report = endpoint_report(result, bounds, probes)
    out.add("sweep_report.txt", report)
    print(lio.sweep_csv(result), end="")
    print(report, end="")
    return EXIT_OK if ok else EXIT_REPORT


def _explore_runs(cfg: ExperimentConfig, eta: float) -> list:
    spec = LazyMDPSpec(cfg.env.mdp, cfg.default_policy, eta)

    def run(seed):
        return q_learning_lazy(spec, cfg.learning.replace(seed=seed))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(run, cfg.seeds))
    else:
        runs = [run(seed) for seed in cfg.seeds]
    return runs


def cmd_explore(cfg: ExperimentConfig, out: Outputs) -> int:
    grid = cfg.env.grid
    curve_rows, final_rows, occ_columns = [], [], {}
    heatmaps = []
    before = ~grid.has_key
    for eta in cfg.etas:
        runs = _explore_runs(cfg, eta)
        scores = np.array([r.curve for r in runs])
        lazy = np.array([[row[2] for row in lio.curve_rows(r)] for r in runs])
        for phase in range(scores.shape[1]):
            curve_rows.append([eta, phase, scores[:, phase].mean(), scores[:, phase].std(),
                               lazy[:, phase].mean(), lazy[:, phase].std()])
        for seed, r in zip(cfg.seeds, runs):
            final_rows.append([eta, seed, r.final_score, r.final_control_frequency])
        occ = np.mean([r.occupancy for r in runs], axis=0)
        occ_columns[eta] = occ
        pre = np.where(before, occ, np.nan)
        post = np.where(~before, occ, np.nan)
        heatmaps.append(render_values(grid, pre, f"eta={eta:g} occupancy before key"))
        heatmaps.append(render_values(grid, post, f"eta={eta:g} occupancy after key"))
        final = scores[:, -1]
        ctrl = np.array([r.final_control_frequency for r in runs])
        print(f"eta={eta:g} seeds={len(runs)} final score {final.mean():.4f} +- {final.std():.4f} "
              f"reach>=0.8 {np.mean(final >= 0.8):.2f} control frequency {ctrl.mean():.4f}")
    out.add("curves.csv", lio.csv_text(
        ["eta", "phase", "score_mean", "score_std", "lazy_frequency_mean", "lazy_frequency_std"], curve_rows))
    out.add("final.csv", lio.csv_text(["eta", "seed", "final_score", "final_control_frequency"], final_rows))
    occ_header = lio.STATE_HEADER + [f"occupancy_eta_{_eta_tag(e)}" for e in cfg.etas]
    occ_rows = [_state_prefix(cfg.env, s) + [occ_columns[e][s] for e in cfg.etas] for s in range(grid.n_states)]
    out.add("occupancy.csv", lio.csv_text(occ_header, occ_rows))
    out.add("occupancy.txt", "\n".join(heatmaps))
    return EXIT_OK


def cmd_importance(cfg: ExperimentConfig, out: Outputs) -> int:
    env = cfg.env
    q_star = value_iteration(env.mdp, cfg.tol, cfg.max_iters)
    maps = [action_gap(q_star), importance_advice(q_star)]
    for eta in cfg.etas:
        spec = LazyMDPSpec(env.mdp, cfg.default_policy, eta)
        maps.append(lazy_gap_importance(spec, cfg.tol, solve(spec, cfg.tol, cfg.max_iters)))
    names = [m.name if m.eta is None else f"{m.name}_eta_{_eta_tag(m.eta)}" for m in maps]
    rows = [_state_prefix(env, s) + [m.values[s] for m in maps] for s in range(env.mdp.n_states)]
    out.add("importance.csv", lio.csv_text(_state_header(env) + names, rows))
    decision = ~env.mdp.absorbing
    summary = []
    for m, name in zip(maps, names):
        threshold = 0.0 if m.eta is None else m.eta
        summary.append(f"{name}: support {int((m.support(threshold) & decision).sum())}")
    if env.grid is not None:
        text = []
        for m, name in zip(maps, names):
            text.append(f"{name}\n" + side_by_side(heatmap_panels(env.grid, m.values)))
        out.add("importance.txt", "\n".join(text))
        print("\n".join(text))
    print("\n".join(summary))
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, out: Outputs) -> int:
    mdp = cfg.env.mdp
    print(f"environment {cfg.env.name}: {mdp.n_states} states, {mdp.n_actions} actions, "
          f"gamma={mdp.gamma:g}, {int(mdp.absorbing.sum())} absorbing")
    print(f"default policy: {cfg.default_name}")
    if cfg.etas:
        print("eta: " + ", ".join(f"{e:g}" for e in cfg.etas))
    print(f"seeds: {len(cfg.seeds)} starting at {cfg.seeds[0]}")
    print("config ok")
    return EXIT_OK


HANDLERS = {
    "solve": cmd_solve,
    "eta-bounds": cmd_eta_bounds,
    "sweep": cmd_sweep,
    "explore": cmd_explore,
    "importance": cmd_importance,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"lazymdp {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(cfg.out)
    try:
        code = HANDLERS[cfg.command](cfg, out)
    except ConvergenceError as exc:
        print(f"lazymdp {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except SweepError as exc:
        print(f"lazymdp {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
