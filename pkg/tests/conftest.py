import math

import numpy as np
import pytest

from relaxwave.poly import ModelParams
from relaxwave.profile import wave_at_speed

# recurring parameter set; slow and fast speeds of the pulse pair
B, D, TAU = 0.5, 0.1, 0.1
C_SLOW, C_FAST = 0.65, 1.5

ACCEPTANCE_RESULTS: dict = {}


def random_params(rng, c_cap=5.0) -> ModelParams:
    """Admissible parameter tuple drawn from a fixed box."""
    b = rng.uniform(0.05, 1.0)
    d = rng.uniform(0.01, 0.5)
    tau = rng.uniform(0.0, 0.5)
    cap = min(1 / math.sqrt(tau), c_cap) if tau > 0 else c_cap
    c = rng.uniform(0.05, 0.98) * cap
    return ModelParams(b=b, c=c, d=d, tau=tau)


@pytest.fixture(scope="session")
def slow_profile():
    return wave_at_speed(B, D, TAU, C_SLOW)


@pytest.fixture(scope="session")
def fast_profile():
    return wave_at_speed(B, D, TAU, C_FAST)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
