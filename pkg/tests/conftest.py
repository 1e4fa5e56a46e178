import numpy as np
import pytest

from quadnet.model import init_symmetric
from quadnet.risk import Dataset, RiskSpec, logistic


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_net():
    return init_symmetric(d=6, m=64, B_x=1.0, seed=11)


@pytest.fixture
def sphere_data(rng):
    X = rng.standard_normal((40, 6))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    y = np.sign(X[:, 0] * X[:, 1])
    return Dataset(X, y, 1.0)


@pytest.fixture
def small_spec(small_net, sphere_data):
    return RiskSpec(small_net, sphere_data, logistic(), lam=1e-3)
