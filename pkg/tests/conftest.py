import numpy as np
import pytest

from mincer_decomp.model_frame import DesignMatrix, ObservationTable, build_design


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs")


@pytest.fixture
def h012():
    """Three-point design h = {0, 1, 2} with w = h**2."""
    h = np.array([0.0, 1.0, 2.0])
    return build_design(ObservationTable(h ** 2, h, np.empty((3, 0))))


def random_design(rng, n, p):
    """[1, h, h², z...] with continuous h so the design has full rank."""
    h = rng.uniform(0, 16, n)
    z = rng.normal(size=(n, p - 3))
    X = np.column_stack([np.ones(n), h, h * h, z])
    w = X @ rng.normal(size=p) * 0.05 + rng.normal(size=n)
    return DesignMatrix(w, X)


def random_psd(rng, p, scale=1.0):
    A = rng.normal(size=(p, p)) * scale
    return A @ A.T / p


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, in criterion order."""
    import test_acceptance as acc

    if not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(acc.RESULTS):
        ok, detail = acc.RESULTS[num]
        terminalreporter.write_line(f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
