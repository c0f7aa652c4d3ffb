import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vrhb.data import fixture_a, spectrum_b

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def fixa():
    return fixture_a()


@pytest.fixture(scope="session")
def specb():
    return spectrum_b()


@pytest.fixture
def w_diag():
    return np.array([1.0, 1.0]) / np.sqrt(2.0)


# one line per acceptance criterion, printed after the test summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
