import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from sourceseek._kernels import available_backends

settings.register_profile("default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


@pytest.fixture
def recipes_dir():
    return Path(__file__).resolve().parent.parent / "recipes"
