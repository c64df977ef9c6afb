import pytest

from perisolve.cases import builtin_case
from perisolve.solver import continuation_solve


def _solve(name):
    case = builtin_case(name)
    traj, report = continuation_solve(case.system, case.bounds, envelopes=(case.env_f, case.env_g))
    return case, traj, report


@pytest.fixture(scope="session")
def example_solution():
    return _solve("example")


@pytest.fixture(scope="session")
def vdp_solution():
    return _solve("vdp")
