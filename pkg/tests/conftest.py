import numpy as np
import pytest

from stratified.groups import preset


@pytest.fixture(scope="session")
def h1():
    return preset("H1")


@pytest.fixture(scope="session")
def r3():
    return preset("R3")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
