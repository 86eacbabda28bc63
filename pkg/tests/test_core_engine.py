import numpy as np
import pytest

from core_engine import CompositeProblem, as_vector, finite_diff_jacobian_check, objective_value
from errors import DimensionMismatch, NonFiniteValue
from interfaces import SmoothMap
from problems import AffineMap, QuadraticObjectiveMap, make_phase_retrieval
from prox_toolbox import BoxIndicator, L1Norm, LinearFunction, SquaredL2, ZeroFunction


class _ScaledJvpMap(SmoothMap):
    """c(x) = A x whose jvp is wrong by a factor of two"""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self.dim = self.A.shape[1]
        self.beta = 0.0

    def eval(self, x):
        return self.A @ x

    def jvp(self, x, v):
        return 2.0 * self.A @ v

    def vjp(self, x, w):
        return self.A.T @ w


def _square_problem():
    return CompositeProblem(g=ZeroFunction(), h=LinearFunction([1.0]),
                            c=QuadraticObjectiveMap(np.array([[2.0]]), np.array([0.0])))


def test_objective_value_square():
    problem = _square_problem()
    assert objective_value(problem, np.array([3.0])) == pytest.approx(9.0)
    assert problem.counters.n_c_eval == 1


def test_objective_outside_domain_skips_c():
    problem = CompositeProblem(g=BoxIndicator([-1.0], [1.0]), h=L1Norm(1),
                               c=AffineMap(np.eye(1), np.zeros(1)))
    assert objective_value(problem, np.array([2.0])) == np.inf
    assert problem.counters.n_c_eval == 0


def test_constants_and_fresh_counters(phase_small):
    problem = phase_small.problem
    assert problem.mu == pytest.approx(problem.L * problem.beta)
    objective_value(problem, phase_small.x0)
    copy = problem.fresh()
    assert copy.counters.n_c_eval == 0
    assert copy.c is problem.c


def test_h_without_lipschitz_is_rejected():
    with pytest.raises(ValueError):
        CompositeProblem(g=ZeroFunction(), h=SquaredL2(), c=AffineMap(np.eye(2), np.zeros(2)))


def test_as_vector_validation():
    assert as_vector(2.0).shape == (1,)
    with pytest.raises(DimensionMismatch):
        as_vector(np.zeros(3), dim=2)
    with pytest.raises(DimensionMismatch):
        as_vector(np.zeros((2, 2)))
    with pytest.raises(NonFiniteValue):
        as_vector([1.0, np.nan])


def test_phase_retrieval_value_on_a_line():
    instance = make_phase_retrieval(d=3, m=6, seed=4)
    problem = instance.problem
    A, b = instance.extra["A"], instance.extra["b"]
    direction = np.array([1.0, -0.5, 0.25])
    for s in np.linspace(-2.0, 2.0, 9):
        x = s * direction
        expected = np.mean(np.abs((A @ x) ** 2 - b))
        assert objective_value(problem, x) == pytest.approx(expected, rel=1e-12, abs=1e-14)


def test_finite_difference_check_affine():
    A = np.random.default_rng(1).standard_normal((4, 3))
    c = AffineMap(A, np.zeros(4))
    assert finite_diff_jacobian_check(c, np.ones(3), n_dirs=5, step=1e-3) <= 1e-10


def test_finite_difference_check_square():
    c = QuadraticObjectiveMap(np.array([[2.0]]), np.array([0.0]))
    assert finite_diff_jacobian_check(c, np.array([1.0]), n_dirs=3, step=1e-6) <= 1e-7


def test_finite_difference_check_catches_wrong_jvp():
    c = _ScaledJvpMap(2.0 * np.eye(3))
    assert finite_diff_jacobian_check(c, np.ones(3), n_dirs=4) > 1e-3


def test_finite_difference_check_needs_directions():
    with pytest.raises(ValueError):
        finite_diff_jacobian_check(AffineMap(np.eye(2), np.zeros(2)), np.zeros(2), n_dirs=0)
