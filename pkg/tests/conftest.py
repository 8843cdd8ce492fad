import numpy as np
import pytest

from fovtrack.config import ScenarioConfig


@pytest.fixture
def scenario():
    return ScenarioConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
