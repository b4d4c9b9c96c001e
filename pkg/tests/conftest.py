import os

import pytest
from hypothesis import settings

from cache import cache
from gaussian_rates import ChannelParams


@pytest.fixture
def params():
    return ChannelParams(P=10.0, P1=5.0, P2=5.0, N1=1.0, N2=4.0)


@pytest.fixture
def weak_relay_params():
    return ChannelParams(P=10.0, P1=5.0, P2=0.0, N1=4.0, N2=1.0)


@pytest.fixture
def clean_cache():
    cache.clear()
    yield cache
    cache.clear()


settings.register_profile("dev", settings(
    max_examples=25,
    deadline=None,
))

settings.register_profile("ci", settings(
    max_examples=200,
    deadline=None,
))

settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))
