"""Shared fixtures and tuned hypothesis profiles."""

import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    # fixed seed: failures must replay exactly
    return random.Random(0xC0FFEE)
