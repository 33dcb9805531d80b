import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_PI = 2.0 * np.pi

# the parameter set used throughout: lambda = omega_m = 2pi x 100 kHz, kappa = 2pi x 1.25 kHz
LAM = TWO_PI * 1e5
OMEGA_M = TWO_PI * 1e5
KAPPA = TWO_PI * 1.25e3
NBAR = 0.025
HBAR_BETA = 5.91e-6

ACCEPTANCE = []


def record(number, name, ok, detail=""):
    """Store and print one acceptance line, then assert."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
