import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, shift=1.0):
    B = rng.standard_normal((d, d))
    return B.T @ B + shift * np.eye(d)
