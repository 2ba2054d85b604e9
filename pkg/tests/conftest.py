import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from broadwell import BoundaryTrace, SolverParams, solve_truncated

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REF_DATA = (0.4, 0.1, 0.3, 0.2)
REF_K = 8.0

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def reference_trace(n):
    return BoundaryTrace.constant(n, REF_DATA)


@pytest.fixture(scope="session")
def ref_params():
    return SolverParams(k=REF_K)


@pytest.fixture(scope="session")
def ref_solves(ref_params):
    """Converged reference solves keyed by grid size."""
    cache = {}

    def get(n):
        if n not in cache:
            fb = reference_trace(n)
            F, rep = solve_truncated(fb, REF_K, ref_params)
            cache[n] = (fb, F, rep)
        return cache[n]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
