import numpy as np
import pytest

from core.models import Box, Configuration
from lab.samplers import IntensityMeasure, PoissonModel


def _config_1d(*xs: float) -> Configuration:
    return Configuration.from_points(np.array(xs, dtype=float).reshape(-1, 1), 1)


@pytest.fixture
def config_1d():
    """Factory: config_1d(0.0, 1.0) is the unit-mass configuration {0, 1} on R."""
    return _config_1d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_interval() -> Box:
    return Box((0.0,), (1.0,))


@pytest.fixture
def unit_square() -> Box:
    return Box((0.0, 0.0), (1.0, 1.0))


@pytest.fixture
def poisson_2() -> PoissonModel:
    """Poisson on [0, 2) with unit intensity (mE = 2)."""
    return PoissonModel(IntensityMeasure.uniform(Box((0.0,), (2.0,))))
