import pytest

from rollguard.barrier import AlphaLinear, GeometryParams
from rollguard.sysmodel import ActuatorParams


@pytest.fixture
def geom():
    return GeometryParams(half_width=0.30, cg_height=0.40)


@pytest.fixture
def actuator():
    return ActuatorParams(tau_v=5.0, tau_omega=5.0)


@pytest.fixture
def alpha():
    return AlphaLinear(4.0)
