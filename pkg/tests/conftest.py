import numpy as np
import pytest

from sgeo import build


@pytest.fixture(scope="session")
def circle16():
    return build("circle", cutoff=16)


@pytest.fixture(scope="session")
def circle64():
    return build("circle", cutoff=64)


@pytest.fixture(scope="session")
def torus8():
    return build("torus", cutoff=8)


@pytest.fixture(scope="session")
def torus10():
    return build("torus", cutoff=10)


@pytest.fixture(scope="session")
def interval64():
    return build("interval", cutoff=64)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
