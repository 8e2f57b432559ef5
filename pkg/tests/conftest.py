import numpy as np
import pytest

from kinlayer.collision import make_model
from kinlayer.expansion import Expansion, ExpansionConfig
from kinlayer.velocity_space import GridSpec, build_axisym_grid, build_full_grid


@pytest.fixture(scope="session")
def full_grid():
    return build_full_grid(GridSpec(points_per_axis=12))


@pytest.fixture(scope="session")
def fine_full_grid():
    return build_full_grid(GridSpec(points_per_axis=24))


@pytest.fixture(scope="session")
def axi0():
    return build_axisym_grid(GridSpec(points_per_axis=12, perp_points=6), 0)


@pytest.fixture(scope="session")
def axi1(axi0):
    return axi0.with_mode(1)


@pytest.fixture(scope="session")
def bgk_full(full_grid):
    return make_model("bgk", full_grid, nu0=1.0)


@pytest.fixture(scope="session")
def bgk0(axi0):
    return make_model("bgk", axi0)


@pytest.fixture(scope="session")
def bgk1(axi1):
    return make_model("bgk", axi1)


@pytest.fixture(scope="session")
def hs_full(full_grid):
    return make_model("hard-sphere", full_grid)


@pytest.fixture(scope="session")
def hs0(axi0):
    return make_model("hard-sphere", axi0)


@pytest.fixture(scope="session")
def expansion():
    """Default acceptance scenario (K = 2)."""
    return Expansion(ExpansionConfig(K=2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
