import numpy as np
import pytest

from peaklab.geometry import ball, build_grid
from peaklab.leastenergy import solve_fixed_point
from peaklab.radial import solve_radial


@pytest.fixture(scope="session")
def ball4():
    """Unit ball in R^4 at the coarse working resolution."""
    return build_grid(ball(1.0, 4), 0.15)


@pytest.fixture(scope="session")
def ball3():
    return build_grid(ball(1.0, 3), 0.1)


@pytest.fixture(scope="session")
def sol_p10(ball4):
    return solve_fixed_point(ball4, 10.0)


@pytest.fixture(scope="session")
def radial_p10():
    return solve_radial(4, 10.0)


# one line per acceptance criterion, printed after the run
_ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
