import math

import numpy as np
import pytest

from kfgm import Grid, PhysicalParams

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def natural():
    return PhysicalParams()


@pytest.fixture
def unit_grid():
    return Grid(0.0, 1.0, 11)


@pytest.fixture
def pi_grid():
    return Grid(0.0, math.pi, 129)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
