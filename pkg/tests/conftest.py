import numpy as np
import pytest

from qdiscern.core import PureState, pauli

ACCEPTANCE_LINES = []


@pytest.fixture
def plus():
    return PureState(np.array([1, 1]) / np.sqrt(2))


@pytest.fixture
def up():
    return PureState(np.array([1, 0]))


@pytest.fixture
def sz():
    return pauli("z")


@pytest.fixture
def sx():
    return pauli("x")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
