import numpy as np
import pytest

from mixbgk.grid import PhaseGrid, SpatialGrid, VelocityGrid
from mixbgk.mixture import MixtureParams

EQUAL = MixtureParams()
UNEQUAL = MixtureParams(m1=2.0, m2=1.0, n10=1.5, n20=1.0, delta=0.6, omega=0.3, gamma=0.01)


@pytest.fixture(params=[EQUAL, UNEQUAL], ids=["equal-mass", "unequal-mass"])
def params(request):
    return request.param


@pytest.fixture
def vgrid16():
    return VelocityGrid(7.0, 16)


@pytest.fixture
def hgrid16(vgrid16):
    return PhaseGrid(SpatialGrid(), vgrid16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
