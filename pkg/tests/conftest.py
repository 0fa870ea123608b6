import numpy as np
import pytest

from eigrefine.linalg import gen_spectrum


@pytest.fixture
def separated():
    """60 x 60 matrix whose top three eigenvalues are well separated."""
    lam = np.concatenate([[4.0, -3.0, 2.0], np.linspace(0.9, 0.05, 57)])
    A, Q = gen_spectrum(lam, 7)
    return A, Q, lam


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
