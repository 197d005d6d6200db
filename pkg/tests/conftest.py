import numpy as np
import pytest

from switchattack.models import make_linear, make_mlp2
from switchattack.objectives import AttackGoal


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_goal(rng, k):
    mode = "targeted" if rng.integers(2) else "untargeted"
    return AttackGoal(mode, int(rng.integers(k)))


def random_model(rng, d, k):
    if rng.integers(2):
        return make_linear(d, k, rng)
    return make_mlp2(d, int(rng.integers(4, 12)), k, rng)


def _finite_difference_gradient(fn, x, step=1e-3):
    """Central-difference oracle, independent of any backprop path."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        g[i] = (fn(hi) - fn(lo)) / (2 * step)
    return g


@pytest.fixture
def finite_difference_gradient():
    return _finite_difference_gradient
