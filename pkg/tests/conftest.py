import numpy as np
import pytest

from sparsedoa.geometry import GridSpec, build_geometry


@pytest.fixture(scope="session")
def design_grid():
    return GridSpec()


@pytest.fixture(scope="session")
def ura(design_grid):
    return build_geometry("URA", design_grid)


@pytest.fixture(scope="session")
def nested(design_grid):
    return build_geometry("Nested", design_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
