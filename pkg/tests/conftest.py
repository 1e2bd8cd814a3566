import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def fig1b_cnn5():
    from layerplace.fixtures import fig1b_problem
    return fig1b_problem(("cnn5",), L=1)
