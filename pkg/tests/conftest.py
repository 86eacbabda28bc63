"""
Shared fixtures: small zoo instances, a quadratic smooth function and a 2-d grid minimizer
"""

import numpy as np
import pytest

from interfaces import SmoothFunction
from problems import make_abs_square, make_lad, make_phase_retrieval
from smoothing import make_smoothed


class QuadraticSmooth(SmoothFunction):
    """x^T P x / 2 + p^T x"""

    def __init__(self, P, p):
        self.P = np.asarray(P, dtype=float)
        self.p = np.asarray(p, dtype=float)
        self.lipschitz_gradient = float(np.linalg.norm(self.P, 2))

    def value(self, x):
        return 0.5 * float(x @ self.P @ x) + float(self.p @ x)

    def gradient(self, x):
        return self.P @ x + self.p


def _grid_argmin(fn, center, width, levels=12, n=41):
    """Minimize fn over a square by repeatedly zooming a grid around the best point"""
    best = np.asarray(center, dtype=float)
    for _ in range(levels):
        axis = np.linspace(-width, width, n)
        candidates = [best + np.array([a, b]) for a in axis for b in axis]
        values = [fn(z) for z in candidates]
        best = candidates[int(np.argmin(values))]
        width *= 4.0 / (n - 1)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def abs_square():
    return make_abs_square()


@pytest.fixture
def phase_small():
    return make_phase_retrieval(d=5, m=10, seed=0)


@pytest.fixture
def lad_small():
    return make_lad(d=5, m=20, seed=0)


@pytest.fixture
def huber_phase(phase_small):
    """Phase retrieval with h replaced by its Moreau envelope (smooth h)"""
    return make_smoothed(phase_small.problem, 0.05)


@pytest.fixture
def quadratic_smooth():
    return QuadraticSmooth


@pytest.fixture
def grid_argmin():
    return _grid_argmin
