import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def prox_grid_oracle(penalty, x, step, n_points=100_001):
    """Brute-force 1-d prox objective minimum on [-10|x|-10, 10|x|+10]."""
    span = 10.0 * abs(x) + 10.0
    grid = np.linspace(-span, span, n_points)
    vals = np.asarray(penalty.value(grid), dtype=np.float64)
    obj = 0.5 * (grid - x) ** 2 + step * vals
    k = int(np.argmin(obj))
    return obj[k], grid[k]


def prox_objective(penalty, x, step, u):
    return 0.5 * (u - x) ** 2 + step * float(penalty.value(u))
