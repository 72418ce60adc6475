import numpy as np
import pytest

from sparse_poisson.model import ModelSpec


def within_se(estimate, target, se, k=3.0):
    return abs(estimate - target) <= k * se


@pytest.fixture
def small_spec():
    mu0 = np.array([1.0, 2.0, 1.5, 1.0])
    return ModelSpec(n=8, p=4, sigma=0.5, mu0=mu0, mu_inf=4.0,
                     signals={1: [3.0, 2.0, 1.5, 1.0], 5: [1.0, 4.0, 4.0, 2.0]})
