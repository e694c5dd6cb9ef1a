import numpy as np
import pytest

from thinslab import Field, Grid


@pytest.fixture
def grid64():
    return Grid(64, 2.0 * np.pi)


@pytest.fixture
def grid128():
    return Grid(128, 2.0 * np.pi)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return Field(grid, vals)


def rel_err(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / max(np.linalg.norm(np.ravel(b)), 1e-300)
