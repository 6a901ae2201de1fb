import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ifsjacobi import (IFSSystem, equilibrium_atoms, interval_union, rkpw_jacobi,
                       solve_gap_roots)

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cantor():
    return IFSSystem.cantor()


@pytest.fixture(scope="session")
def julia21():
    return IFSSystem.julia(2.1)


@pytest.fixture(scope="session")
def cantor_desk():
    """Gap roots, rank-4400 matrix and a G=2000 reference measure for Cantor E_8."""
    sys = solve_gap_roots(interval_union(IFSSystem.cantor(), 8))
    R = rkpw_jacobi(equilibrium_atoms(sys, 80), 4400)
    ref = equilibrium_atoms(sys, 2000)
    return sys, R, ref


def chebyshev_jacobi(n: int, lo: float = -1.0, hi: float = 1.0):
    """Closed-form arcsine coefficients of [lo, hi]."""
    from ifsjacobi import JacobiMatrix
    h = 0.5 * (hi - lo)
    b = np.full(n, 0.5 * h)
    if n > 1:
        b[1] = h / np.sqrt(2.0)
    return JacobiMatrix(np.full(n, 0.5 * (lo + hi)), b, 1.0)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
