import pytest
from hypothesis import HealthCheck, settings

from kirchsim import integrate

settings.register_profile(
    "suite", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(params=integrate.available_backends())
def backend(request):
    return request.param
