import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jgse.model import assemble_dataset

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_data(p, n, seed=0, center=True, normalize=False):
    rng = np.random.default_rng(seed)
    return assemble_dataset(rng.standard_normal((n + 1, p)), center=center, normalize=normalize)


def random_spd(p, rng, shift=0.5):
    A = rng.standard_normal((p, p))
    return A @ A.T / p + shift * np.eye(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
