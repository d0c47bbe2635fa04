import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from xpharq.channel import ChannelModel, Rayleigh, TwoStateMi

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def two_state():
    return ChannelModel(TwoStateMi(1.0, 1.5, 0.75))


@pytest.fixture(scope="session")
def two_state_dist(two_state):
    return two_state.discretize()


@pytest.fixture(scope="session")
def rayleigh10():
    return ChannelModel(Rayleigh.from_db(10.0))


@pytest.fixture(scope="session")
def rayleigh10_dist(rayleigh10):
    return rayleigh10.discretize()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
