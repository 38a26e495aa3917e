import sys

import numpy as np
import pytest

from hybridyn import _backend
from hybridyn.phase_space import PhaseGrid


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run the test once per kernel backend."""
    with _backend.use(request.param):
        yield request.param


@pytest.fixture
def grid():
    return PhaseGrid()


@pytest.fixture
def small_grid():
    return PhaseGrid(-4.0, 4.0, -4.0, 4.0, 32, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines, which pytest otherwise captures."""
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.LINES:
        terminalreporter.write_line(line)
