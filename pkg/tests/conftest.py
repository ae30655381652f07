import numpy as np
import pytest

from cone_attention.geometry import HalfSpacePoint


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_point(rng, dim, low=0.05, high=0.95, spread=1.0):
    return HalfSpacePoint(rng.uniform(-spread, spread, dim - 1), rng.uniform(low, high))


def random_rotation(rng, k):
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))
