import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tacnode.laxpair import MParams, entries_from_pii  # noqa: E402
from tacnode.painleve import PIIConfig, solve_hastings_mcleod  # noqa: E402
from tacnode.rhkernel import RHSolver  # noqa: E402

_REPORT = []


def record(line):
    """Queue a line for the end-of-session summary."""
    _REPORT.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def hm():
    """Hastings-McLeod solutions keyed by nu, solved on first use."""
    cache = {}

    def get(nu):
        if nu not in cache:
            cache[nu] = solve_hastings_mcleod(PIIConfig(nu=nu))
        return cache[nu]

    return get


@pytest.fixture(scope="session")
def rh(hm):
    """RH solvers keyed by (nu, s, tau)."""
    cache = {}

    def get(nu, s, tau):
        key = (nu, s, tau)
        if key not in cache:
            params = MParams(nu, s, tau)
            cache[key] = (params, RHSolver(params, entries_from_pii(hm(nu), s, tau)))
        return cache[key]

    return get
