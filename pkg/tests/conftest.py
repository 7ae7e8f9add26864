import numpy as np
import pytest

from polybiharm.localops import Discretization
from polybiharm.mesh import PolyMesh, generate_mesh

KINDS = ["cartesian", "perturbed-quad", "hexagonal"]


def unit_square_cell():
    return PolyMesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]])


def pentagon_cell():
    return PolyMesh([[0, 0], [2, 0], [2.5, 1.2], [1, 2], [-0.4, 1]], [[0, 1, 2, 3, 4]])


@pytest.fixture(scope="session")
def discs():
    cache = {}

    def get(kind, n, k):
        key = (kind, n, k)
        if key not in cache:
            cache[key] = Discretization(generate_mesh(kind, n, seed=0), k)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
