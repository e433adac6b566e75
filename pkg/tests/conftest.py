import numpy as np
import pytest

from solenoidlab.params import SystemParams, TrigPoly


@pytest.fixture
def cos_poly():
    return TrigPoly(0.0, (1.0,), ())


@pytest.fixture
def system_b2(cos_poly):
    # b=2, |gamma|=0.5, irrational rotation: the small reference system
    return SystemParams(2, 0.5, np.sqrt(2.0) - 1.0, cos_poly)


@pytest.fixture
def system_b3(cos_poly):
    # b=3, |gamma|=0.55: the rich reference system
    return SystemParams(3, 0.55, np.sqrt(2.0) - 1.0, cos_poly)


@pytest.fixture
def zero_system():
    return SystemParams(2, 0.5, np.sqrt(2.0) - 1.0, TrigPoly(0.0, (), ()))


@pytest.fixture
def constant_system():
    return SystemParams(2, 0.5, np.sqrt(2.0) - 1.0, TrigPoly(0.7, (), ()))
