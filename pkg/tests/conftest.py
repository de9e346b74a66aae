import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qscale",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("qscale")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: verdict lines of the acceptance criteria, filled by tests/test_acceptance.py
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
