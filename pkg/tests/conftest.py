import numpy as np
import pytest

from spegarch.mc import lattice_weights
from spegarch.networks import grid_contiguity, row_standardize


@pytest.fixture(scope="session")
def lattice4():
    return lattice_weights(2, 2)


@pytest.fixture(scope="session")
def lattice9():
    return lattice_weights(3, 3)


@pytest.fixture(scope="session")
def ring4():
    w = np.zeros((4, 4))
    for i in range(4):
        w[i, (i + 1) % 4] = w[i, (i - 1) % 4] = 1.0
    return row_standardize(w)


@pytest.fixture(scope="session")
def rook9():
    return row_standardize(grid_contiguity(3, 3, "rook"))


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(LINES, key=_order):
            terminalreporter.write_line(LINES[key])


def _order(key):
    head = key.split()[0]
    return (0, int(head)) if head.isdigit() else (1, head)
