# tests/conftest.py

import numpy as np
import pytest

from app.models.measure import GroundSpace, RandomVar
from app.models.structures import Graphon


# 1. SPACES
@pytest.fixture
def base2():
    return GroundSpace.uniform(2)


@pytest.fixture
def base3():
    return GroundSpace.uniform(3)


@pytest.fixture
def square2(base2):
    return GroundSpace.product(base2, base2)


# 2. THE SIGN MATRIX [[1, -1], [-1, 1]] (cut norm 1/4)
@pytest.fixture
def sign_values():
    return RandomVar(np.array([1.0, -1.0, -1.0, 1.0]))


@pytest.fixture
def sign_graphon():
    return Graphon.from_matrix([[1.0, -1.0], [-1.0, 1.0]])


# 3. RANDOMNESS
@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_sign_graphon(rng: np.random.Generator, n: int) -> Graphon:
    """A symmetric +-1 matrix on a uniform n-point base."""
    upper = rng.choice([-1.0, 1.0], size=(n, n))
    matrix = np.triu(upper) + np.triu(upper, 1).T
    return Graphon.from_matrix(matrix)


@pytest.fixture
def sign_graphon_factory(rng):
    return lambda n: random_sign_graphon(rng, n)
