import pytest

from hqsl.config import load_settings
from hqsl.models import ModelParams, TimeGrid


@pytest.fixture(autouse=True)
def clear_settings_cache():
    load_settings.cache_clear()
    yield
    load_settings.cache_clear()


@pytest.fixture
def strong_baseline() -> ModelParams:
    return ModelParams(gamma0=0.2)


@pytest.fixture
def weak_baseline() -> ModelParams:
    return ModelParams(gamma0=5.0)


@pytest.fixture
def weak_hierarchy() -> ModelParams:
    return ModelParams(gamma0=5.0, kappa=5.0, gamma=5.0)


@pytest.fixture
def grid() -> TimeGrid:
    return TimeGrid(t_end=3.0, dt=1e-3)
