import numpy as np
import pytest

from core_engine import objective_value
from data_models import InnerSolver
from errors import BudgetTooSmall
from fast_gradient import optimal_method_bound
from problems import make_phase_retrieval
from smoothing import (budget_for_target, budget_plan_precondition, make_budget_plan, make_smoothed,
                       make_smoothing_plan, run_budgeted_driver, run_smoothed_driver, smoothing_gap,
                       smoothing_total_cost)


def test_smoothing_plan(phase_small):
    problem = phase_small.problem
    plan = make_smoothing_plan(problem, 1e-2)
    assert plan.t == pytest.approx(1.0 / (problem.L * problem.beta))
    assert plan.nu == pytest.approx(1e-4 / (2 * problem.L ** 3 * problem.beta))
    assert smoothing_gap(problem.L, plan.nu, plan.t) == pytest.approx(5e-3, rel=1e-12)
    with pytest.raises(ValueError):
        make_smoothing_plan(problem, 0.0)


def test_smoothed_objective_sandwich(phase_small, rng):
    problem = phase_small.problem
    nu = 0.05
    smoothed = make_smoothed(problem, nu)
    assert smoothed.L == problem.L
    assert smoothed.h.gradient_lipschitz == pytest.approx(1.0 / nu)
    for _ in range(20):
        x = phase_small.x0 + rng.standard_normal(5)
        diff = objective_value(problem.fresh(), x) - objective_value(smoothed.fresh(), x)
        assert -1e-12 <= diff <= problem.L ** 2 * nu / 2 + 1e-12
    with pytest.raises(ValueError):
        make_smoothed(problem, 0.0)


def test_budget_plan_fits_total(rng):
    for _ in range(50):
        L, beta, jac, q = rng.uniform(0.2, 3.0, size=4)
        floor = budget_plan_precondition(L, beta, jac, q)
        T = int(np.ceil(floor * rng.uniform(1.0, 200.0)))
        plan = make_budget_plan(L, beta, jac, q, T)
        assert plan.N >= 0
        assert (plan.N + 1) * plan.per_step_inner <= T
        ell = jac ** 2 / (L * beta)
        assert optimal_method_bound(plan.per_step_inner - 1, ell, L) <= q / (plan.N + 1) * (1 + 1e-12)


def test_budget_plan_rejects_small_budgets():
    with pytest.raises(BudgetTooSmall):
        make_budget_plan(1.0, 1.0, 1.0, 1.0, 0)
    floor = budget_plan_precondition(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(BudgetTooSmall):
        make_budget_plan(1.0, 1.0, 1.0, 1.0, int(np.floor(floor)) - 1)
    with pytest.raises(ValueError):
        make_budget_plan(1.0, 1.0, 1.0, 0.0, 100)


def test_budget_for_target_grows_with_accuracy():
    loose = budget_for_target(1.0, 2.0, 3.0, 1.0, 1.0, 1e-1)
    tight = budget_for_target(1.0, 2.0, 3.0, 1.0, 1.0, 1e-2)
    assert tight > loose > budget_plan_precondition(1.0, 2.0, 3.0, 1.0)


def test_smoothing_total_cost():
    cost = smoothing_total_cost(1.0, 2.0, 3.0, 1.0, 0.1)
    assert set(cost) == {"nu", "outer", "inner_per_step", "total"}
    assert cost["nu"] == pytest.approx(0.01 / 4.0)
    assert cost["outer"] == int(np.ceil(16 * 2.0 * 1.0 / 0.01))
    assert cost["total"] == cost["outer"] * cost["inner_per_step"]


def test_smoothed_driver_certifies_target(phase_small):
    plan = make_smoothing_plan(phase_small.problem, 5e-2)
    x, trace = run_smoothed_driver(phase_small.problem, phase_small.x0, plan)
    assert trace.summary["certified_prox_grad_norm"] <= 5e-2
    assert trace.checks_named("smoothing_comparison")
    assert trace.all_checks_pass(), trace.failed_checks()
    assert x.shape == (5,)


@pytest.mark.slow
def test_smoothed_driver_at_tight_accuracy():
    instance = make_phase_retrieval(d=10, m=30, seed=0)
    plan = make_smoothing_plan(instance.problem, 1e-2)
    _, trace = run_smoothed_driver(instance.problem, instance.x0, plan)
    assert trace.summary["certified_prox_grad_norm"] <= 1e-2
    assert trace.checks_named("smoothing_comparison")
    assert trace.all_checks_pass(), trace.failed_checks()


@pytest.mark.slow
def test_smoothed_driver_with_primal_subsolves(phase_small):
    plan = make_smoothing_plan(phase_small.problem, 5e-2)
    _, trace = run_smoothed_driver(phase_small.problem, phase_small.x0, plan, inner=InnerSolver.FGM_PRIMAL)
    assert trace.summary["certified_prox_grad_norm"] <= 5e-2


@pytest.mark.slow
def test_budgeted_driver_respects_budget(phase_small):
    problem = phase_small.problem
    q = 1.0
    T = int(np.ceil(30 * budget_plan_precondition(problem.L, problem.beta, problem.jac_bound, q)))
    plan = make_budget_plan(problem.L, problem.beta, problem.jac_bound, q, T)
    _, trace = run_budgeted_driver(problem, phase_small.x0, plan, f_inf=phase_small.f_inf)
    assert trace.summary["total_inner"] == (plan.N + 1) * plan.per_step_inner <= T
    for name in ("budget_step_bound", "budget_step_gap", "budget_total", "budget_min_grad"):
        assert trace.checks_named(name), name
    assert trace.all_checks_pass(), trace.failed_checks()
