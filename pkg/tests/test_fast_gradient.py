import numpy as np
import pytest

from data_models import StoppingRule
from errors import BudgetExhausted
from fast_gradient import (AdditiveCompositeInstance, fgm_iterations_for_gap, fgm_iterations_for_residual,
                           fgm_rate_bound, fgm_run,
                           fgm_run_small_subgradient, fgm_weight, optimal_method_bound, optimal_method_next_weight,
                           optimal_method_run)
from prox_toolbox import SquaredL2
from subproblem import DualModel, build_model, model_value, solve_exact


def _random_quadratic(quadratic_smooth, seed, d=6, alpha=0.05):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((d, d))
    P = B @ B.T / d
    p = rng.standard_normal(d)
    inst = AdditiveCompositeInstance(f=quadratic_smooth(P, p), p=SquaredL2(alpha))
    x_star = np.linalg.solve(P + alpha * np.eye(d), -p)
    return inst, x_star, inst.value(x_star)


def test_first_weight():
    assert fgm_weight(0.0, 0.3, 4.0) == pytest.approx(0.5)


def test_weight_equation():
    theta, alpha, L_f = 2.0, 0.1, 3.0
    a = fgm_weight(theta, alpha, L_f)
    assert a ** 2 / (theta + a) == pytest.approx(2.0 * (1.0 + alpha * theta) / L_f)


@pytest.mark.parametrize("seed", range(10))
def test_rate_bound_holds(quadratic_smooth, seed):
    inst, x_star, f_star = _random_quadratic(quadratic_smooth, seed)
    x0 = np.zeros(6)
    _, trace = fgm_run(inst, x0, StoppingRule.fixed(60))
    dist0_sq = float(np.sum((x_star - x0) ** 2))
    for record in trace.records[1:]:
        bound = fgm_rate_bound(record.k, inst.alpha, inst.L_f, dist0_sq)
        assert record.F_val - f_star <= bound + 1e-12


def test_gap_stop_within_iteration_count(quadratic_smooth):
    inst, x_star, f_star = _random_quadratic(quadratic_smooth, 7)
    x0 = np.ones(6)
    eps = 1e-8
    _, trace = fgm_run(inst, x0, StoppingRule.gap(eps, f_star))
    assert trace.records[-1].F_val - f_star <= eps
    dist0_sq = float(np.sum((x_star - x0) ** 2))
    by_rate = next(j for j in range(1, 100000) if fgm_rate_bound(j, inst.alpha, inst.L_f, dist0_sq) <= eps)
    assert trace.records[-1].k <= by_rate
    assert fgm_iterations_for_gap(eps, inst.alpha, inst.L_f, dist0_sq) > 1.0


def test_unreachable_gap_exhausts_budget(quadratic_smooth):
    inst, _, f_star = _random_quadratic(quadratic_smooth, 1)
    with pytest.raises(BudgetExhausted):
        fgm_run(inst, np.zeros(6), StoppingRule.gap(1e-30, f_star - 1.0, max_iters=3))


def test_small_subgradient_residual(quadratic_smooth):
    inst, x_star, _ = _random_quadratic(quadratic_smooth, 3)
    seen = []
    x_hat, res = fgm_run_small_subgradient(inst, np.zeros(6), 1e-6, monitor=lambda j, x, xh, r: seen.append(r))
    assert res <= 1e-6
    true_residual = np.linalg.norm(inst.f.gradient(x_hat) + inst.p.gradient(x_hat))
    assert true_residual <= res + 1e-12
    # strong convexity turns the residual into a distance bound
    assert np.linalg.norm(x_hat - x_star) <= res / inst.alpha + 1e-12
    assert seen[-1] == res
    with pytest.raises(ValueError):
        fgm_run_small_subgradient(inst, np.zeros(6), 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_small_subgradient_within_iteration_count(quadratic_smooth, seed):
    inst, x_star, _ = _random_quadratic(quadratic_smooth, seed)
    x0 = np.zeros(6)
    steps = []
    _, res = fgm_run_small_subgradient(inst, x0, 1e-6, monitor=lambda j, x, xh, r: steps.append(j))
    assert res <= 1e-6
    dist0_sq = float(np.sum((x_star - x0) ** 2))
    assert steps[-1] <= fgm_iterations_for_residual(1e-6, inst.alpha, inst.L_f, dist0_sq)


def test_instance_needs_positive_smoothness(quadratic_smooth):
    with pytest.raises(ValueError):
        AdditiveCompositeInstance(f=quadratic_smooth(np.zeros((2, 2)), np.zeros(2)), p=SquaredL2())


def test_optimal_method_weights():
    assert optimal_method_next_weight(1.0) == pytest.approx((np.sqrt(5.0) - 1.0) / 2.0)
    a = 1.0
    for _ in range(10):
        nxt = optimal_method_next_weight(a)
        assert (1.0 - nxt) / nxt ** 2 == pytest.approx(1.0 / a ** 2)
        a = nxt


@pytest.mark.parametrize("budget", [5, 20, 60])
def test_optimal_method_bound_on_subproblem(phase_small, budget):
    problem = phase_small.problem.fresh()
    t = 1.0 / problem.mu
    m = build_model(problem, phase_small.x0, t)
    dm = DualModel(m)
    v, _ = optimal_method_run(dm, budget)
    best = solve_exact(build_model(problem.fresh(), phase_small.x0, t), tol=1e-13).x_plus
    gap = model_value(m, v) - model_value(m, best)
    assert gap <= optimal_method_bound(budget - 1, m.ell, problem.L) + 1e-9


def test_optimal_method_needs_a_budget(phase_small):
    problem = phase_small.problem.fresh()
    dm = DualModel(build_model(problem, phase_small.x0, 1.0 / problem.mu))
    with pytest.raises(ValueError):
        optimal_method_run(dm, 0)
