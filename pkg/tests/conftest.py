import numpy as np
import pytest
import scipy.optimize as so

from hydrogep.lp import GE, LE
from hydrogep.model import compile_compact, d1


def highs_value(lp, binaries=()):
    """Optimal value from scipy's HiGHS, used only as an outside reference."""
    A = lp.A.tocsr()
    lo = np.where(lp.senses == LE, -np.inf, lp.b)
    hi = np.where(lp.senses == GE, np.inf, lp.b)
    integ = np.zeros(lp.n)
    integ[list(binaries)] = 1
    r = so.milp(lp.c, constraints=so.LinearConstraint(A, lo, hi), bounds=so.Bounds(lp.lb, lp.ub),
                integrality=integ)
    assert r.success, r.message
    return r.fun + lp.offset


def highs_lp(lp):
    """(status, value) of an LP from scipy's HiGHS."""
    A = lp.A.tocsr()
    lo = np.where(lp.senses == LE, -np.inf, lp.b)
    hi = np.where(lp.senses == GE, np.inf, lp.b)
    r = so.milp(lp.c, constraints=so.LinearConstraint(A, lo, hi), bounds=so.Bounds(lp.lb, lp.ub))
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(r.status, r.message)
    if status == "optimal":
        return status, r.fun + lp.offset
    if r.status == 4 or "unbounded" in str(r.message).lower():
        return "unbounded", None
    return status, None


@pytest.fixture(scope="session")
def d1_case():
    return d1()


@pytest.fixture(scope="session")
def d1_compact(d1_case):
    system, scen = d1_case
    return compile_compact(system, scen)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
