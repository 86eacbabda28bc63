"""
Smoothing Module
Moreau-envelope smoothing of h, the smoothed inexact driver, and the fixed-budget dual driver
"""

import logging
from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core_engine import CompositeProblem, as_vector
from data_models import (ErrorSchedule, InnerSolver, OracleCounters, BudgetPlan, ProxLinearConfig,
                         ScheduleKind, SmoothingPlan, Trace)
from errors import BudgetExhausted, BudgetTooSmall
from fast_gradient import optimal_method_bound, optimal_method_run
from performance_monitor import PerformanceMonitor
from prox_linear import FgmSubscheme, run_coupled, run_inexact_dual_stationary
from prox_toolbox import MoreauEnvelope
from subproblem import DualModel, build_model, model_value, reference_step

logger = logging.getLogger(__name__)


# ============================================================================
# PLANS
# ============================================================================

def make_smoothing_plan(problem: CompositeProblem, eps_target: float) -> SmoothingPlan:
    """
    Smoothing parameter for a target accuracy eps on |G_{1/mu}|.

    nu = eps^2 / (2 L^3 beta) makes sqrt(L^2 nu / (2t)) = eps/2 at t = 1/mu.
    """
    if eps_target <= 0:
        raise ValueError("make_smoothing_plan: eps_target must be positive")
    L, beta = problem.L, problem.beta
    if L <= 0 or beta <= 0:
        raise ValueError("make_smoothing_plan: L and beta must be positive")
    return SmoothingPlan(eps_target=eps_target, t=1.0 / (L * beta),
                         nu=eps_target ** 2 / (2.0 * L ** 3 * beta), inner_eps_target=0.5 * eps_target)


def smoothing_gap(L: float, nu: float, t: float) -> float:
    """sqrt(L^2 nu / (2t)), the loss when comparing |G_t| with its smoothed counterpart"""
    return float(np.sqrt(L ** 2 * nu / (2.0 * t)))


def budget_plan_precondition(L: float, beta: float, jac_bound: float, q: float) -> float:
    """Smallest admissible total budget 4 (1.5)^(3/2) |grad c| / sqrt(2 beta q / L)"""
    return 4.0 * 1.5 ** 1.5 * jac_bound / np.sqrt(2.0 * beta * q / L)


def make_budget_plan(L: float, beta: float, jac_bound: float, q: float, T: int) -> BudgetPlan:
    """
    Split a total inner budget T over N+1 outer steps of the dual optimal method.

    N = ceil((T sqrt(2 beta q / L) / (4 |grad c|))^(2/3)) - 2 and
    per_step_inner = ceil(4 |grad c| sqrt(L (N+1) / (2 beta q))). N is lowered
    until (N+1) per_step_inner <= T when rounding overshoots.

    Raises:
        BudgetTooSmall: when T fails the precondition or no N >= 0 fits
    """
    if q <= 0:
        raise ValueError("make_budget_plan: q must be positive")
    if T < budget_plan_precondition(L, beta, jac_bound, q):
        raise BudgetTooSmall(f"make_budget_plan: T={T} below {budget_plan_precondition(L, beta, jac_bound, q):.3f}")
    root = np.sqrt(2.0 * beta * q / L)

    def per_step(N: int) -> int:
        return max(1, int(np.ceil(4.0 * jac_bound * np.sqrt(L * (N + 1) / (2.0 * beta * q)))))

    N = int(np.ceil((T * root / (4.0 * jac_bound)) ** (2.0 / 3.0))) - 2
    while N >= 0 and (N + 1) * per_step(N) > T:
        N -= 1
    if N < 0:
        raise BudgetTooSmall(f"make_budget_plan: no outer count fits T={T}")
    return BudgetPlan(q=q, T=int(T), N=N, per_step_inner=per_step(N))


def budget_for_target(L: float, beta: float, jac_bound: float, q: float, gap0: float, eps: float) -> float:
    """Total budget 8 |grad c| / sqrt(beta q / L) (1 + mu (gap0 + q) / eps^2)^(3/2) reaching eps"""
    mu = L * beta
    return 8.0 * jac_bound / np.sqrt(beta * q / L) * (1.0 + mu * (gap0 + q) / eps ** 2) ** 1.5


def smoothing_total_cost(L: float, beta: float, jac_bound: float, gap0: float, eps: float) -> Dict[str, float]:
    """
    Basic-operation estimate of the smoothing strategy with primal fast gradient subsolves.

    Returns:
        Dict: outer iterations, inner iterations per step, and their product
    """
    mu = L * beta
    nu = eps ** 2 / (2.0 * L ** 3 * beta)
    L_h = 1.0 / nu
    ratio = jac_bound ** 2 * L_h / mu
    outer = int(np.ceil(16.0 * mu * gap0 / eps ** 2))
    inner = max(1, int(np.ceil(np.sqrt(2.0 * ratio) * np.log(max(ratio, np.e)))))
    return {"nu": nu, "outer": outer, "inner_per_step": inner, "total": float(outer * inner)}


# ============================================================================
# SMOOTHED PROBLEM
# ============================================================================

def make_smoothed(problem: CompositeProblem, nu: float) -> CompositeProblem:
    """F^nu = g + h_nu(c) with the same L and a 1/nu-smooth h_nu"""
    if nu <= 0:
        raise ValueError("make_smoothed: nu must be positive")
    return replace(problem, h=MoreauEnvelope(problem.h, nu), name=f"{problem.name}_smoothed",
                   counters=OracleCounters())


def run_smoothed_driver(problem: CompositeProblem, x0, plan: SmoothingPlan,
                        inner: InnerSolver = InnerSolver.FGM_DUAL, max_outer: int = 500,
                        check_comparison: bool = True) -> Tuple[np.ndarray, Trace]:
    """
    Run the inexact prox-linear method on F^nu until the smoothed step certifies eps/2.

    The dual-stationary variant runs with eps_k = 1/(L k^2), capped so that its
    surrogate can close at eps/2; FGM_PRIMAL selects the coupled scheme with
    fast gradient steps. The returned point is certified on the original problem
    by a high-accuracy evaluation of |G_{1/mu}|.

    Args:
        problem: Original composite problem
        x0: Starting point
        plan: Smoothing plan from make_smoothing_plan
        inner: FGM_DUAL or FGM_PRIMAL
        max_outer: Outer iteration cap
        check_comparison: Check |G_t| <= |G^nu_t| + sqrt(L^2 nu/(2t)) at every iterate

    Returns:
        Tuple[np.ndarray, Trace]: Certified point and the smoothed run's trace

    Raises:
        BudgetExhausted: when the certificate does not close within max_outer
    """
    smoothed = make_smoothed(problem, plan.nu)
    L, t = problem.L, plan.t
    if not np.isclose(smoothing_gap(L, plan.nu, t), plan.inner_eps_target, rtol=1e-12):
        raise ValueError("run_smoothed_driver: inconsistent plan")
    if inner == InnerSolver.FGM_PRIMAL:
        cfg = ProxLinearConfig(t=t, max_outer=max_outer, stop_tol=plan.inner_eps_target,
                               subscheme=FgmSubscheme(), check_guarantees=False)
        trace = run_coupled(smoothed, x0, cfg)
    else:
        eps_cap = plan.inner_eps_target ** 2 * t / (32.0 * L)
        schedule = ErrorSchedule(ScheduleKind.INVERSE_SQUARE, 1.0 / L, cap=eps_cap)
        cfg = ProxLinearConfig(t=t, schedule=schedule, max_outer=max_outer, stop_tol=plan.inner_eps_target)
        trace = run_inexact_dual_stationary(smoothed, x0, cfg)
    trace.solver = f"smoothed_{trace.solver}"

    monitor = PerformanceMonitor(trace.solver, OracleCounters())
    if check_comparison:
        gap = smoothing_gap(L, plan.nu, t)
        for record in trace.records:
            G_true = np.linalg.norm(reference_step(problem, record.x, t)[1])
            G_smooth = np.linalg.norm(reference_step(smoothed, record.x, t)[1])
            record.prox_grad_true = float(G_true)
            record.extra["prox_grad_smoothed"] = float(G_smooth)
            trace.checks.append(monitor.record_check("smoothing_comparison", record.k, G_true, G_smooth + gap,
                                                     slack=1e-8 * (1.0 + G_true)))
    x_out = trace.x_out
    certified = float(np.linalg.norm(reference_step(problem, x_out, t)[1]))
    trace.summary["certified_prox_grad_norm"] = certified
    check = monitor.record_check("smoothed_certificate", len(trace.records), certified, plan.eps_target)
    trace.checks.append(check)
    logger.info(f"SmoothedDriver: |G_1/mu(x_out)| = {certified:.3e} (target {plan.eps_target:.3e})")
    if not check.passed:
        raise BudgetExhausted(f"run_smoothed_driver: |G| = {certified:.3e} > {plan.eps_target:.3e} "
                              f"after {len(trace.records)} outer steps")
    return x_out, trace


# ============================================================================
# FIXED-BUDGET DRIVER
# ============================================================================

def run_budgeted_driver(problem: CompositeProblem, x0, plan: BudgetPlan,
                        f_inf: Optional[float] = None, check_guarantees: bool = True
                        ) -> Tuple[np.ndarray, Trace]:
    """
    N+1 prox-linear steps at t = 1/mu, each given exactly per_step_inner
    iterations of the optimal method on the subproblem dual.

    Each step's gap is bounded by 8 |grad c|^2 L^2 / mu / per_step_inner^2 <= q/(N+1);
    with the high-accuracy reference the realized gaps and the bound
    min |G_{1/mu}|^2 <= 2 mu (F(x0) - inf F + q) / N are checked.

    Args:
        problem: Composite problem
        x0: Starting point
        plan: Budget plan from make_budget_plan
        f_inf: Known inf F, if any (defaults to the best value seen)
        check_guarantees: Evaluate the reference quantities and checks

    Returns:
        Tuple[np.ndarray, Trace]: The iterate with the smallest |G_{1/mu}| and the trace
    """
    prob = problem.fresh()
    t = 1.0 / prob.mu
    monitor = PerformanceMonitor("budgeted", prob.counters)
    x = as_vector(x0)
    model = build_model(prob, x, t)
    F = model.center_value()
    F0, F_best = F, F
    eps_step = plan.q / (plan.N + 1)
    total_inner = 0
    best_x, best_G = x.copy(), np.inf
    min_G2 = np.inf
    logger.info(f"BudgetedDriver: N={plan.N}, per_step_inner={plan.per_step_inner}, T={plan.T}")

    for k in range(plan.N + 1):
        dual = DualModel(model)
        v, _ = optimal_method_run(dual, plan.per_step_inner)
        total_inner += plan.per_step_inner
        G_norm, ref = None, None
        if check_guarantees:
            ref = reference_step(prob, x, t)
            G_norm = float(np.linalg.norm(ref[1]))
            min_G2 = min(min_G2, G_norm ** 2)
            if G_norm < best_G:
                best_x, best_G = x.copy(), G_norm
        step = (v - x) / t
        monitor.record_iterate(k, F, G_norm if G_norm is not None else float(np.linalg.norm(step)),
                               step_norm=t * float(np.linalg.norm(step)), inner_iters=plan.per_step_inner,
                               eps_k=eps_step, prox_grad_true=G_norm, x=x.copy())
        if check_guarantees:
            bound = optimal_method_bound(plan.per_step_inner - 1, model.ell, prob.L)
            monitor.record_check("budget_step_bound", k, bound, eps_step, slack=1e-12 * eps_step)
            uncounted = build_model(prob.fresh(), x, t)
            realized = model_value(uncounted, v) - model_value(uncounted, ref[0])
            monitor.record_check("budget_step_gap", k, realized, eps_step, slack=1e-9 * (1.0 + abs(F)))
        x = v
        model = build_model(prob, x, t)
        F = model.center_value()
        F_best = min(F_best, F)

    monitor.record_check("budget_total", plan.N, total_inner, plan.T)
    if total_inner > plan.T:
        raise BudgetExhausted(f"run_budgeted_driver: used {total_inner} > T={plan.T} inner iterations")
    if check_guarantees and plan.N >= 1:
        floor = F_best if f_inf is None else min(F_best, f_inf)
        monitor.record_check("budget_min_grad", plan.N, min_G2, 2.0 * prob.mu * (F0 - floor + plan.q) / plan.N,
                             slack=1e-9 * (1.0 + abs(F0)) * prob.mu)
    if not check_guarantees:
        best_x = x
    trace = monitor.finish(best_x)
    trace.summary["total_inner"] = total_inner
    trace.summary["final_F"] = F
    return best_x, trace
