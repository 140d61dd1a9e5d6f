"""Shared fixtures and a fast, reproducible hypothesis profile."""

import pytest
from hypothesis import HealthCheck, settings

from fraclab import build_interval, build_rectangle

settings.register_profile(
    "fraclab",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("fraclab")


@pytest.fixture
def interval64():
    return build_interval(0.0, 1.0, 64)


@pytest.fixture
def square16():
    return build_rectangle((0.0, 0.0), (1.0, 1.0), 16, 16)


@pytest.fixture
def square8():
    return build_rectangle((0.0, 0.0), (1.0, 1.0), 8, 8)
