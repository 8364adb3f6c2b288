import numpy as np
import pytest

from halfwave.grid import RadialGrid
from halfwave.operators import soft_decay_potential, zero_potential


@pytest.fixture(scope="session")
def grid_small():
    return RadialGrid(256, 0.25)


@pytest.fixture(scope="session")
def grid_mid():
    return RadialGrid(512, 0.5)


@pytest.fixture(scope="session")
def attractive():
    return soft_decay_potential(-0.3, 3.0)


@pytest.fixture(scope="session")
def free():
    return zero_potential()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
