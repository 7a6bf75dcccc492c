import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bosrec import ModelParams

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# the reference coupled scenario used across tests
STANDARD = ModelParams(omega1=5.0, omega2=5.0, kappa1=0.05, kappa2=0.08, g=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def standard():
    return STANDARD
