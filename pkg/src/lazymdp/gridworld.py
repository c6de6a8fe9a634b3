"""Text-map gridworlds: Rivers & Bridges and Key-Door-Treasure.

A map is a rectangular block of characters, optionally preceded by
``key=value`` header lines (``gamma``, ``step_reward``, ``water_reward``,
``goal_reward``, ``apple_reward``). Blank lines and lines starting with ``;``
are ignored.

Legend::

    #  wall        .  floor     S  start     G  goal / treasure
    ~  water       =  bridge    K  key       D  door     A  apple

States are ``(row, col, has_key, door_open)`` tuples reachable from the start.
Actions are 0 up, 1 down, 2 left, 3 right; every transition is deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .mdp import TabularMDP, deterministic_policy, greedy_action, value_iteration

LEGEND = set("#.SG~=KDA")
ACTIONS = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ("up", "down", "left", "right")
ACTION_ARROWS = "^v<>"
MAX_STATES = 1_000_000
PARAM_KEYS = ("gamma", "step_reward", "water_reward", "goal_reward", "apple_reward")
CANONICAL_MAPS = ("rivers_bridges", "kdt", "kdt_apple")


class GridParseError(ValueError):
    """Map text violates the format; ``errors`` lists ``(line, col, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = []
        for line, col, msg in self.errors:
            where = f"line {line}" + (f", col {col}" if col is not None else "")
            lines.append(f"{where}: {msg}")
        super().__init__("invalid map:\n  " + "\n  ".join(lines))


@dataclass(frozen=True)
class GridWorldSpec:
    grid: tuple[str, ...]
    step_reward: float = 0.0
    water_reward: float = -100.0
    goal_reward: float = 1.0
    apple_reward: float = 0.1
    gamma: float = 0.99
    name: str = "grid"

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.grid), len(self.grid[0])

    def cells(self, char: str) -> list[tuple[int, int]]:
        return [(r, c) for r, row in enumerate(self.grid) for c, ch in enumerate(row) if ch == char]

    def to_text(self) -> str:
        header = [f"{k}={getattr(self, k)!r}" for k in PARAM_KEYS]
        return "\n".join(header + list(self.grid)) + "\n"


def parse_grid(text: str, name: str = "grid", **params) -> GridWorldSpec:
    """Parse map text; keyword ``params`` override header values.

    Raises :class:`GridParseError` listing every violation found.
    """
    if not text or not text.strip():
        raise GridParseError([(1, None, "map text is empty")])
    errors = []
    header: dict[str, float] = {}
    rows: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n").rstrip()
        if not line or line.lstrip().startswith(";"):
            continue
        if "=" in line and not rows and line.split("=", 1)[0].strip().isidentifier():
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in PARAM_KEYS:
                errors.append((lineno, None, f"unknown header key {key!r}"))
                continue
            try:
                header[key] = float(value)
            except ValueError:
                errors.append((lineno, None, f"header {key} has non-numeric value {value!r}"))
            continue
        rows.append((lineno, line))

    for key, value in params.items():
        if key not in PARAM_KEYS:
            raise TypeError(f"unknown grid parameter {key!r}")
        if value is not None:
            header[key] = float(value)

    if not rows:
        errors.append((1, None, "no grid rows"))
        raise GridParseError(errors)

    width = len(rows[0][1])
    for lineno, line in rows:
        if len(line) != width:
            errors.append((lineno, None, f"row has length {len(line)}, expected {width}"))
        for col, ch in enumerate(line, start=1):
            if ch not in LEGEND:
                errors.append((lineno, col, f"unknown character {ch!r}"))

    starts = [(ln, c + 1) for ln, line in rows for c, ch in enumerate(line) if ch == "S"]
    if not starts:
        errors.append((rows[0][0], None, "map has no start 'S'"))
    elif len(starts) > 1:
        for ln, c in starts[1:]:
            errors.append((ln, c, "second start 'S' (exactly one allowed)"))
    if not any("G" in line for _, line in rows):
        errors.append((rows[0][0], None, "map has no goal 'G'"))

    height = len(rows)
    for i, (lineno, line) in enumerate(rows):
        for col, ch in enumerate(line):
            border = i in (0, height - 1) or col in (0, len(line) - 1)
            if border and ch not in "#~":
                errors.append((lineno, col + 1, f"border cell {ch!r} must be a wall or water"))

    gamma = header.get("gamma", 0.99)
    if not 0.0 <= gamma < 1.0:
        errors.append((rows[0][0], None, f"gamma={gamma} outside [0, 1)"))
    if errors:
        raise GridParseError(errors)
    return GridWorldSpec(grid=tuple(line for _, line in rows), name=name, **header)


def load_map(name_or_path: str, **params) -> GridWorldSpec:
    """Parse a canonical map by name (e.g. ``"kdt"``) or a map file by path."""
    if name_or_path in CANONICAL_MAPS or name_or_path.removesuffix(".map") in CANONICAL_MAPS:
        stem = name_or_path.removesuffix(".map")
        text = resources.files("lazymdp").joinpath("maps", f"{stem}.map").read_text()
        return parse_grid(text, name=stem, **params)
    with open(name_or_path) as fh:
        text = fh.read()
    stem = name_or_path.rsplit("/", 1)[-1].removesuffix(".map")
    return parse_grid(text, name=stem, **params)


class StateOverflowError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CompiledGrid:
    spec: GridWorldSpec
    mdp: TabularMDP
    states: tuple[tuple[int, int, bool, bool], ...]
    index: dict = field(repr=False)
    masks: dict = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def state_of(self, row: int, col: int, has_key: bool = False, door_open: bool = False) -> int:
        return self.index[(row, col, bool(has_key), bool(door_open))]

    def cell_of_state(self, s: int) -> tuple[int, int]:
        r, c, _, _ = self.states[s]
        return r, c

    def states_of_cell(self, row: int, col: int) -> list[int]:
        return [i for i, (r, c, _, _) in enumerate(self.states) if (r, c) == (row, col)]

    @cached_property
    def rows(self) -> np.ndarray:
        return np.array([s[0] for s in self.states])

    @cached_property
    def cols(self) -> np.ndarray:
        return np.array([s[1] for s in self.states])

    @cached_property
    def has_key(self) -> np.ndarray:
        return np.array([s[2] for s in self.states])

    @cached_property
    def door_open(self) -> np.ndarray:
        return np.array([s[3] for s in self.states])

    @property
    def slices(self) -> list[tuple[bool, bool]]:
        """The (has_key, door_open) combinations present, in sorted order."""
        return sorted({(s[2], s[3]) for s in self.states})

    def slice_mask(self, has_key: bool, door_open: bool) -> np.ndarray:
        return (self.has_key == has_key) & (self.door_open == door_open)

    def mask(self, name: str) -> np.ndarray:
        try:
            return self.masks[name]
        except KeyError:
            raise KeyError(f"unknown mask {name!r}; available: {sorted(self.masks)}") from None

    def cell_mask_to_states(self, cell_mask: np.ndarray) -> np.ndarray:
        cell_mask = np.asarray(cell_mask, dtype=bool)
        if cell_mask.shape != self.spec.shape:
            raise ValueError(f"cell mask has shape {cell_mask.shape}, expected {self.spec.shape}")
        return cell_mask[self.rows, self.cols]

    @cached_property
    def q_star(self) -> np.ndarray:
        q = value_iteration(self.mdp)
        q.flags.writeable = False
        return q


def _neighbours(r, c):
    return [(r + dr, c + dc) for dr, dc in ACTIONS]


def _doorway_cells(grid) -> set[tuple[int, int]]:
    h, w = len(grid), len(grid[0])
    out = set()
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            if grid[r][c] == "#":
                continue
            vertical = grid[r - 1][c] == "#" and grid[r + 1][c] == "#"
            horizontal = grid[r][c - 1] == "#" and grid[r][c + 1] == "#"
            if vertical or horizontal:
                out.add((r, c))
    return out


def compile_grid(spec: GridWorldSpec) -> CompiledGrid:
    """Build the tabular MDP over states reachable from the start."""
    grid = spec.grid
    h, w = spec.shape
    has_key_layer = bool(spec.cells("K")) or bool(spec.cells("D"))
    bound = h * w * (4 if has_key_layer else 1)
    if bound > MAX_STATES:
        raise StateOverflowError(f"map could yield {bound} states, limit is {MAX_STATES}")

    terminal = {"~": spec.water_reward, "G": spec.goal_reward, "A": spec.apple_reward}
    (start,) = spec.cells("S")
    s0 = (start[0], start[1], False, False)

    def step(state, a):
        r, c, key, door = state
        dr, dc = ACTIONS[a]
        nr, nc = r + dr, c + dc
        ch = grid[nr][nc] if 0 <= nr < h and 0 <= nc < w else "#"
        if ch == "#" or (ch == "D" and not key):
            return state, spec.step_reward
        if ch == "K":
            key = True
        if ch == "D":
            door = True
        return (nr, nc, key, door), terminal.get(ch, spec.step_reward)

    def is_absorbing(state):
        return grid[state[0]][state[1]] in terminal

    index = {s0: 0}
    order = [s0]
    edges = []
    queue = deque([s0])
    while queue:
        state = queue.popleft()
        if is_absorbing(state):
            continue
        for a in range(4):
            nxt, rew = step(state, a)
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            edges.append((index[state], a, index[nxt], rew))

    n = len(order)
    trans = np.zeros((n, 4, n))
    rewards = np.zeros((n, 4))
    absorbing = np.array([is_absorbing(s) for s in order])
    for s in np.flatnonzero(absorbing):
        trans[s, :, s] = 1.0
    for s, a, s2, rew in edges:
        trans[s, a, s2] = 1.0
        rewards[s, a] = rew
    init = np.zeros(n)
    init[0] = 1.0
    mdp = TabularMDP(trans, rewards, spec.gamma, init, absorbing)

    rows = np.array([s[0] for s in order])
    cols = np.array([s[1] for s in order])
    chars = np.array([grid[r][c] for r, c in zip(rows, cols)])
    doorways = _doorway_cells(grid)
    anchors = doorways | set(spec.cells("K")) | set(spec.cells("G")) | set(spec.cells("D"))
    critical_cells = {(r, c) for r, c in anchors} | {nb for cell in anchors for nb in _neighbours(*cell)}
    masks = {
        "bridge": chars == "=",
        "door": chars == "D",
        "key": chars == "K",
        "apple": chars == "A",
        "water": chars == "~",
        "goal": chars == "G",
        "start": chars == "S",
        "doorway": np.array([(r, c) in doorways for r, c in zip(rows, cols)]),
        "critical": np.array([(r, c) in critical_cells for r, c in zip(rows, cols)]),
        "absorbing": absorbing.copy(),
    }
    for m in masks.values():
        m.flags.writeable = False
    return CompiledGrid(spec=spec, mdp=mdp, states=tuple(order), index=index, masks=masks)


def default_uniform(grid: CompiledGrid) -> np.ndarray:
    return np.full((grid.n_states, 4), 0.25)


def _state_mask(grid: CompiledGrid, mask) -> np.ndarray:
    if isinstance(mask, str):
        return grid.mask(mask)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape == (grid.n_states,):
        return mask
    if mask.shape == grid.spec.shape:
        return grid.cell_mask_to_states(mask)
    raise ValueError(
        f"mask has shape {mask.shape}; expected {(grid.n_states,)} (states) or {grid.spec.shape} (cells)"
    )


def default_optimal_except(grid: CompiledGrid, mask) -> np.ndarray:
    """Greedy optimal action (lowest index on ties) outside ``mask``, uniform inside.

    ``mask`` is a state mask, a cell mask of the map's shape, or the name of a
    compiled mask such as ``"bridge"``.
    """
    mask = _state_mask(grid, mask)
    pi = deterministic_policy(greedy_action(grid.q_star), 4)
    pi[mask] = 0.25
    return pi


def second_best_actions(q: np.ndarray, tie_tol: float = 1e-9) -> np.ndarray:
    """Best action strictly below the row maximum (lowest index among its ties).

    Rows whose entries are all tied fall back to index 1 of the stable
    descending order, i.e. action 1.
    """
    q = np.asarray(q, dtype=float)
    top = q.max(axis=1, keepdims=True)
    below = q < top - tie_tol
    masked = np.where(below, q, -np.inf)
    second = masked.max(axis=1, keepdims=True)
    choice = np.argmax(below & (masked >= second - tie_tol), axis=1)
    fallback = np.argsort(-q, axis=1, kind="stable")[:, 1]
    return np.where(below.any(axis=1), choice, fallback)


def default_second_best(grid: CompiledGrid) -> np.ndarray:
    return deterministic_policy(second_best_actions(grid.q_star), 4)


def reachable_cells(grid: CompiledGrid) -> set[tuple[int, int]]:
    return {(r, c) for r, c, _, _ in grid.states}
