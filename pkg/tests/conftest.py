import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from commsplit.linalg import SIGMA_X, SIGMA_Z, OperatorSet

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pauli_xz():
    """(-i sigma_x, -i sigma_z) on slots (A=1, B=0)."""
    return OperatorSet({1: -1j * SIGMA_X, 0: -1j * SIGMA_Z})
