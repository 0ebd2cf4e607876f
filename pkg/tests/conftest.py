import numpy as np
import pytest

from idsense import fixtures
from idsense.channel import StateDMC
from idsense.estimation import hamming_distortion


@pytest.fixture
def flip():
    return fixtures.flip_bsc()


@pytest.fixture
def sensor():
    return fixtures.sensor()


@pytest.fixture
def ham2():
    return hamming_distortion(2)


def random_channel(rng: np.random.Generator, nx: int, ny: int, ns: int) -> StateDMC:
    """A random valid channel with Dirichlet rows and prior."""
    kernel = rng.dirichlet(np.ones(ny), size=(nx, ns))
    prior = rng.dirichlet(np.ones(ns))
    return StateDMC(input_size=nx, output_size=ny, state_size=ns,
                    kernel=kernel, state_prior=prior)


@pytest.fixture
def make_random_channel():
    return random_channel
