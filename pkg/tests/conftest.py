import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from merlab.core import DiscreteModel, RngStream, bias_model, random_discrete_model

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("MERLAB_HYPOTHESIS", "default"))


def point_mass_model() -> DiscreteModel:
    """Prior concentrated on one atom of a two-atom coin."""
    return DiscreteModel([1.0, 0.0], [1.0], [[[0.4, 0.6]], [[0.9, 0.1]]], y_values=[0.0, 1.0],
                         w_values=[0.6, 0.1])


@pytest.fixture
def bias():
    return bias_model()


@pytest.fixture(scope="session")
def random_models():
    return [random_discrete_model(RngStream(7, (i,)), max_atoms=4) for i in range(25)]


def model_from_seed(seed: int, **kw) -> DiscreteModel:
    return random_discrete_model(np.random.default_rng(seed), **kw)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
