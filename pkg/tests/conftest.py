import numpy as np
import pytest

from equimarginal.model import ProblemInstance

# high-precision references (mpmath, 40 digits) cross-checked by direct
# numerical maximization with scipy
TWO_CUP_X = (0.92428947909113851, 0.075710520908861487)
TWO_CUP_F = 0.40185760300002804
TWO_CUP_LAM = 0.21604746566665732
THREE_CUP_X = (0.75735931288071485, 0.24264068711928515, 0.0)
THREE_CUP_F = 0.42287638336717465
THREE_CUP_LAM = 0.25904120554427512


def random_coefficients(rng, n, low=0.01, high=1.0):
    # uniform on (low, high]
    return high - (high - low) * rng.random(n)


def random_instance(rng, n_min=1, n_max=10, low=0.01, high=1.0):
    n = int(rng.integers(n_min, n_max + 1))
    return ProblemInstance(random_coefficients(rng, n, low, high))


def random_allocation(rng, n, sparse=True):
    x = rng.exponential(size=n)
    if sparse and n > 1:
        x[rng.random(n) < 0.3] = 0.0
        if not np.any(x > 0):
            x[rng.integers(n)] = 1.0
    return x / np.sum(x)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
