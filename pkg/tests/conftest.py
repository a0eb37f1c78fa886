import numpy as np
import pytest

from superid.problem import example1, example2

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def ex1_coarse():
    return example1(16, 16)


@pytest.fixture(scope="session")
def ex2_coarse():
    return example2(16, 16)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
