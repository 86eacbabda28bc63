import numpy as np
import pytest

from core_engine import CompositeProblem, objective_value
from problems import (PROBLEM_BUILDERS, AffineMap, GreyBoxMap, make_additive_composite, make_exact_penalty,
                      make_instance, make_lad, make_nls_box, make_phase_retrieval)
from prox_toolbox import L1Norm, ZeroFunction


def test_planted_phase_retrieval_is_optimal():
    instance = make_phase_retrieval(d=6, m=18, seed=4)
    assert objective_value(instance.problem.fresh(), instance.x_star) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(instance.x_star) == pytest.approx(1.0)
    assert instance.f_inf == 0.0
    assert objective_value(instance.problem.fresh(), instance.x0) > 0.0


def test_abs_square_constants(abs_square):
    problem = abs_square.problem.fresh()
    assert objective_value(problem, np.array([2.0])) == pytest.approx(3.0)
    assert problem.L == pytest.approx(1.0)
    assert problem.beta == pytest.approx(2.0)
    assert np.isinf(problem.jac_bound)


def test_lad_reference_is_optimal(lad_small, rng):
    problem = lad_small.problem.fresh()
    F_star = objective_value(problem, lad_small.x_star)
    assert F_star == pytest.approx(lad_small.f_inf)
    for _ in range(50):
        x = lad_small.x_star + 0.1 * rng.standard_normal(5)
        assert objective_value(problem, x) >= F_star - 1e-9
    assert problem.mu == 0.0


def test_instances_are_reproducible():
    for name in PROBLEM_BUILDERS:
        a, b = make_instance(name, seed=3), make_instance(name, seed=3)
        np.testing.assert_array_equal(a.x0, b.x0)
        assert objective_value(a.composite.fresh(), a.x0) == objective_value(b.composite.fresh(), b.x0)
        config = a.to_config()
        assert config["name"] == name and config["seed"] == 3
        c = make_instance(config["name"], seed=config["seed"], **config["params"])
        np.testing.assert_array_equal(a.x0, c.x0)


def test_unknown_instance():
    with pytest.raises(KeyError):
        make_instance("rosenbrock")


def test_nls_box_planted_point():
    instance = make_nls_box(d=4, m=6, seed=1)
    problem = instance.problem.fresh()
    assert objective_value(problem, instance.x_star) == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.abs(instance.x_star) <= 1.0)
    assert np.all(np.abs(instance.x0) <= 1.0)
    assert objective_value(problem, np.full(4, 2.0)) == np.inf


def test_exact_penalty(rng):
    instance = make_exact_penalty(d=4, seed=2, lam=5.0)
    assert objective_value(instance.problem.fresh(), np.zeros(4)) == pytest.approx(0.0, abs=1e-14)
    larger = make_exact_penalty(d=4, seed=2, lam=10.0)
    for _ in range(20):
        x = 2.0 * rng.standard_normal(4)
        assert objective_value(larger.problem.fresh(), x) >= objective_value(instance.problem.fresh(), x) - 1e-12


def test_grey_box_counts_simulations(rng):
    A, b = rng.standard_normal((3, 2)), rng.standard_normal(3)
    c = GreyBoxMap(AffineMap(A, b))
    problem = CompositeProblem(g=ZeroFunction(), h=L1Norm(3), c=c)
    x = rng.standard_normal(2)
    assert objective_value(problem, x) == pytest.approx(np.sum(np.abs(A @ x - b)))
    problem.jvp(x, np.ones(2))
    problem.vjp(x, np.ones(3))
    assert c.simulations == {"eval": 1, "jvp": 1, "vjp": 1}


def test_additive_composite_reference():
    instance = make_additive_composite(d=6, seed=5)
    problem = instance.problem.fresh()
    P, p = problem.c.P, problem.c.p
    t = 1.0 / problem.mu
    x = instance.x_star
    residual = (x - problem.g.prox(t, x - t * (P @ x + p))) / t
    assert np.linalg.norm(residual) <= 1e-7
    assert instance.f_inf == pytest.approx(objective_value(problem, x))


def test_lad_reference_has_no_outliers_without_noise():
    instance = make_lad(d=4, m=12, seed=7, noise=0.0)
    assert instance.f_inf == pytest.approx(0.0, abs=1e-8)
