import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dupire_aad import Payoff, RngKey, SimConfig, new_surface, synthetic_surface

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


def flat_surface(sigma: float, spots=(50.0, 200.0), times=(0.0, 1.0)):
    return new_surface(spots, times, np.full((len(spots), len(times)), sigma))


@pytest.fixture
def small_surface():
    return synthetic_surface(5, 4, maturity=1.0)


@pytest.fixture
def small_config():
    return SimConfig(100.0, 1.0, n_steps=8, n_paths=4000, batch_size=1024, key=RngKey(11))


@pytest.fixture
def call110():
    return Payoff("call", 110.0)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[n])
