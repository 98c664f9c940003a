import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import kmsgreen as kg  # noqa: E402

NR = "nonrelativistic"
REL = "relativistic"


@pytest.fixture
def circle2():
    return kg.ThermalCircle(2.0)


@pytest.fixture
def node():
    return kg.single_node()


@pytest.fixture
def packets():
    return [kg.gaussian_packet(1, 0.0, w, n_nodes=65, cutoff=8.0) for w in (0.5, 1.0, 1.5)]


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def coth(x):
    return 1.0 / np.tanh(x)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
