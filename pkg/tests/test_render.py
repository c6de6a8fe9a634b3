import numpy as np
import pytest

from lazymdp.gridworld import compile_grid, parse_grid
from lazymdp.render import (
    CONTROL_CHAR,
    LAZY_CHAR,
    RAMP,
    heatmap_panels,
    mask_panels,
    render_mask,
    render_values,
    side_by_side,
)

LINE = """\
#####
#S.G#
#####
"""


@pytest.fixture
def line():
    return compile_grid(parse_grid(LINE))


def test_ramp_has_ten_levels():
    assert len(RAMP) == 10


def test_heatmap_extremes(line):
    values = np.zeros(line.n_states)
    values[line.state_of(1, 2)] = 1.0
    (title, rows), = heatmap_panels(line, values)
    assert title == "has_key=0 door_open=0"
    assert rows[1] == "#" + RAMP[0] + RAMP[-1] + RAMP[0] + "#"
    assert rows[0] == "#####"


def test_constant_values(line):
    (_, rows), = heatmap_panels(line, np.full(line.n_states, 3.0))
    assert rows[1] == "#" + RAMP[0] * 3 + "#"


def test_mask_characters(line):
    control = np.zeros(line.n_states, dtype=bool)
    control[line.state_of(1, 1)] = True
    (_, rows), = mask_panels(line, control)
    assert rows[1] == "#" + CONTROL_CHAR + LAZY_CHAR + "G#"


def test_shape_errors(line):
    with pytest.raises(ValueError):
        heatmap_panels(line, np.zeros(line.n_states + 1))
    with pytest.raises(ValueError):
        mask_panels(line, np.zeros(2, dtype=bool))


def test_panels_per_slice(kdt):
    text = render_values(kdt, np.arange(kdt.n_states, dtype=float), title="index")
    assert text.splitlines()[0] == "index"
    assert text.count("has_key=") == len(kdt.slices)
    masked = render_mask(kdt, np.zeros(kdt.n_states, dtype=bool))
    assert CONTROL_CHAR not in masked


def test_side_by_side_layout():
    text = side_by_side([("a", ["xx", "yy"]), ("bb", ["z"])], gap=1)
    assert text == "a  bb\nxx z\nyy\n"
    assert side_by_side([]) == ""
