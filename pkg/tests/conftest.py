import numpy as np
import pytest

from fraclb.geometry import ManifoldGeometry, build_grid


@pytest.fixture(scope="session")
def S2():
    return ManifoldGeometry.sphere()


@pytest.fixture(scope="session")
def T1():
    return ManifoldGeometry.torus(1)


@pytest.fixture(scope="session")
def T2():
    return ManifoldGeometry.torus(2)


@pytest.fixture(scope="session")
def sphere_grid16(S2):
    return build_grid(S2, 16)


@pytest.fixture(scope="session")
def sphere_grid32(S2):
    return build_grid(S2, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
