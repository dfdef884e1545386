import numpy as np
import pytest

from thermovisco import discretization as dz
from thermovisco import mesh as fem
from thermovisco.cli import shipped_scenarios


@pytest.fixture(scope="session")
def mesh8():
    return fem.build_mesh(1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def mesh16():
    return fem.build_mesh(1.0, 1.0, 16, 16)


@pytest.fixture(scope="session")
def unit_D16(mesh16):
    return dz.ElasticityTensor.isotropic(mesh16, 1.0, 1.0)


@pytest.fixture(scope="session")
def bases16(mesh16, unit_D16):
    return dz.build_bases(mesh16, unit_D16, 8, 8)


@pytest.fixture(scope="session")
def scenarios():
    return shipped_scenarios()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
