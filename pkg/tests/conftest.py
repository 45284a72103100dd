import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# numba compiles on first call, so the first example of a property can be slow
settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria = {}


@pytest.fixture
def criterion():
    """Record (and print) the one-line verdict of an acceptance criterion."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _criteria[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_criteria):
            terminalreporter.write_line(_criteria[k])
