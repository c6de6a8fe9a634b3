"""ASCII heatmaps of per-state values on a compiled grid."""

from __future__ import annotations

import numpy as np

from .gridworld import CompiledGrid

RAMP = " .:-=+*#%@"
LAZY_CHAR = "·"
CONTROL_CHAR = "█"


def _slice_title(has_key: bool, door_open: bool) -> str:
    return f"has_key={int(has_key)} door_open={int(door_open)}"


def _cells(grid: CompiledGrid, values: np.ndarray, has_key: bool, door_open: bool) -> dict:
    sel = grid.slice_mask(has_key, door_open)
    return {(grid.rows[s], grid.cols[s]): values[s] for s in np.flatnonzero(sel)}


def heatmap_panels(grid: CompiledGrid, values: np.ndarray) -> list[tuple[str, list[str]]]:
    """One panel per (has_key, door_open) slice using a 10-level ramp.

    Values are min-max normalised over all states together so panels are
    comparable. Walls print as ``#``; cells absent from a slice print blank.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_states,):
        raise ValueError(f"values have shape {values.shape}, expected {(grid.n_states,)}")
    finite = values[np.isfinite(values)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 0.0)
    span = hi - lo
    panels = []
    for hk, do in grid.slices:
        cells = _cells(grid, values, hk, do)
        lines = []
        for r, row in enumerate(grid.spec.grid):
            out = []
            for c, ch in enumerate(row):
                if ch == "#":
                    out.append("#")
                elif (r, c) in cells and np.isfinite(cells[(r, c)]):
                    level = 0 if span == 0 else int((cells[(r, c)] - lo) / span * (len(RAMP) - 1) + 0.5)
                    out.append(RAMP[level])
                else:
                    out.append(" ")
            lines.append("".join(out))
        panels.append((_slice_title(hk, do), lines))
    return panels


def mask_panels(grid: CompiledGrid, control: np.ndarray) -> list[tuple[str, list[str]]]:
    """Control mask per slice: control cells as a full block, lazy cells as a dot."""
    control = np.asarray(control, dtype=bool)
    if control.shape != (grid.n_states,):
        raise ValueError(f"mask has shape {control.shape}, expected {(grid.n_states,)}")
    panels = []
    for hk, do in grid.slices:
        cells = _cells(grid, control, hk, do)
        lines = []
        for r, row in enumerate(grid.spec.grid):
            out = []
            for c, ch in enumerate(row):
                if ch == "#":
                    out.append("#")
                elif (r, c) in cells and not grid.mask("absorbing")[grid.index[(r, c, hk, do)]]:
                    out.append(CONTROL_CHAR if cells[(r, c)] else LAZY_CHAR)
                elif (r, c) in cells:
                    out.append(ch)
                else:
                    out.append(" ")
            lines.append("".join(out))
        panels.append((_slice_title(hk, do), lines))
    return panels


def side_by_side(panels: list[tuple[str, list[str]]], gap: int = 3) -> str:
    """Lay titled panels out horizontally."""
    if not panels:
        return ""
    width = max(max(len(title), max(len(line) for line in lines)) for title, lines in panels)
    height = max(len(lines) for _, lines in panels)
    sep = " " * gap
    out = [sep.join(title.ljust(width) for title, _ in panels).rstrip()]
    for i in range(height):
        out.append(sep.join((lines[i] if i < len(lines) else "").ljust(width) for _, lines in panels).rstrip())
    return "\n".join(out) + "\n"


def render_values(grid: CompiledGrid, values: np.ndarray, title: str | None = None) -> str:
    text = side_by_side(heatmap_panels(grid, values))
    return f"{title}\n{text}" if title else text


def render_mask(grid: CompiledGrid, control: np.ndarray, title: str | None = None) -> str:
    text = side_by_side(mask_panels(grid, control))
    return f"{title}\n{text}" if title else text
