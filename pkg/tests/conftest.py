import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qcrl.models import build_preset

settings.register_profile("qcrl", deadline=None, derandomize=True, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qcrl")

T = 50.0
BASELINE_A0 = np.pi ** 2 / T  # sin-window amplitude with area 2 pi


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sq():
    return build_preset("sq_x_z")


@pytest.fixture(scope="session")
def sq3():
    return build_preset("sq_xy_xyz")


@pytest.fixture(scope="session")
def tq():
    return build_preset("tq_xy_detuning")


def baseline_params(n=9):
    A = np.zeros(n)
    A[0] = BASELINE_A0
    return A


def random_fourier(rng, n_harm=4, amp=0.1, scale=0.04):
    return np.concatenate([[rng.uniform(-amp, amp)], rng.normal(0, scale, n_harm),
                           rng.uniform(-np.pi, np.pi, n_harm)])


ACCEPTANCE = {}


def record_criterion(n, ok: bool, detail: str) -> None:
    """Remember one acceptance line; printed now and again in the terminal summary."""
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE[str(n)] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
            terminalreporter.write_line(ACCEPTANCE[key])
