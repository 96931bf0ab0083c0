import numpy as np
import pytest

from xreg.synthetic import make_dataset
from xreg.trainer import Hyperparams, train


@pytest.fixture(scope="session")
def toy_split():
    return make_dataset(600, 80, 40, n_test=120, seed=11)


@pytest.fixture(scope="session")
def toy_model(toy_split):
    tr, _ = toy_split
    return train(tr, Hyperparams(max_leaf=6, threads=1, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
