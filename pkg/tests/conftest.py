import sys
import numpy as np
import pytest


@pytest.fixture
def qubit_example():
    """diag(3/4, 1/4) with H = sigma_x / 2."""
    rho = np.diag([0.75, 0.25]).astype(complex)
    H = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
    return rho, H


@pytest.fixture
def qutrit_example():
    """diag(0.5, 0.3, 0.2) with a generator coupling only the (0, 1) pair."""
    rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
    H = np.zeros((3, 3), dtype=complex)
    H[0, 1] = H[1, 0] = 1.0
    return rho, H


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
