import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20260519)


@pytest.fixture
def scalar_instance():
    """Two paths, one primitive, one instrument, constant basis."""
    A = np.array([1.0, 2.0]).reshape(2, 1, 1)
    b = np.array([[1.0], [4.0]])
    X = np.ones((2, 1))
    return A, b, X


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
