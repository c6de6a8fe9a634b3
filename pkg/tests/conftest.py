import sys

import numpy as np
import pytest

from lazymdp.gridworld import compile_grid, load_map


@pytest.fixture(scope="session")
def rb():
    return compile_grid(load_map("rivers_bridges"))


@pytest.fixture(scope="session")
def kdt():
    return compile_grid(load_map("kdt"))


@pytest.fixture(scope="session")
def kdt_apple():
    return compile_grid(load_map("kdt_apple"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
