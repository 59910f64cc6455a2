import numpy as np
import pytest

from dslashsuite.fields import cold_start, hot_start, random_spinor
from dslashsuite.lattice import LatticeGeometry


class SerialPool:
    """ Stands in for multiprocessing.Pool: same map() contract, chunked as if it had `processes` workers """

    def __init__(self, processes):
        self._processes = processes

    def map(self, func, iterable):
        return [func(x) for x in iterable]


@pytest.fixture(scope='session')
def geom2():
    return LatticeGeometry((2, 2, 2, 2))


@pytest.fixture(scope='session')
def geom42():
    return LatticeGeometry((4, 2, 2, 2))


@pytest.fixture(scope='session')
def geom4():
    return LatticeGeometry((4, 4, 4, 4))


@pytest.fixture(scope='session')
def cold2(geom2):
    return cold_start(geom2)


@pytest.fixture(scope='session')
def hot2(geom2):
    return hot_start(geom2, seed=7)


@pytest.fixture(scope='session')
def hot42(geom42):
    return hot_start(geom42, seed=11)


@pytest.fixture(scope='session')
def hot4(geom4):
    return hot_start(geom4, seed=3)


@pytest.fixture
def spinor(geom2):
    return random_spinor(geom2, seed=5)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return np.linalg.norm(a - b) / np.linalg.norm(b)
