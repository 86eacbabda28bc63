"""
Solver Manager
Registry of named solvers: registration, dispatch on zoo instances, and error capture at the boundary
"""

import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from accelerated import (CurvatureInfo, run_accelerated, run_accelerated_backtracking, run_accelerated_inexact_gap,
                         run_accelerated_inexact_stationary)
from core_engine import objective_value
from data_models import FiniteSumMode, InnerSolver, ProxLinearConfig, SvrgConfig, Trace
from errors import ConfigError, SolverError
from finite_sum import FiniteSumProblem, run_finite_sum_driver
from problems import ProblemInstance
from prox_linear import run_coupled, run_inexact_dual_stationary, run_inexact_function_gap, run_prox_linear
from run_config import SolverConfig
from smoothing import budget_for_target, make_budget_plan, make_smoothing_plan, run_budgeted_driver, run_smoothed_driver

logger = logging.getLogger(__name__)

SolverFn = Callable[[ProblemInstance, SolverConfig], Trace]


def _inner(spec: SolverConfig) -> InnerSolver:
    try:
        return InnerSolver(spec.inner)
    except ValueError:
        raise ConfigError(f"SolverManager: unknown inner solver '{spec.inner}'")


def _outer_config(spec: SolverConfig) -> ProxLinearConfig:
    return ProxLinearConfig(t=spec.t, schedule=spec.schedule.build(), max_outer=spec.max_outer, inner=_inner(spec),
                            stop_tol=spec.stop_tol, inner_cap=spec.inner_cap,
                            check_guarantees=spec.check_guarantees, reference_grad=spec.reference_grad)


def _curvature(instance: ProblemInstance, spec: SolverConfig) -> CurvatureInfo:
    x_star = instance.x_star if spec.use_reference else None
    return CurvatureInfo(x_star=x_star, rho=instance.rho, r=instance.r, M=instance.M)


def _mu_tilde(instance: ProblemInstance, spec: SolverConfig) -> float:
    if spec.mu_tilde is not None:
        return spec.mu_tilde
    mu = instance.composite.mu
    if mu <= 0:
        raise ConfigError("SolverManager: mu = 0, set solver.mu_tilde explicitly")
    return spec.mu_tilde_factor * mu


# ============================================================================
# ADAPTERS
# ============================================================================

def solve_prox_linear(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_prox_linear(instance.composite, instance.x0, _outer_config(spec))


def solve_inexact_gap(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_inexact_function_gap(instance.composite, instance.x0, _outer_config(spec))


def solve_inexact_dual(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_inexact_dual_stationary(instance.composite, instance.x0, _outer_config(spec))


def solve_coupled_fgm(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_coupled(instance.composite, instance.x0, _outer_config(spec))


def solve_smoothed(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    problem = instance.composite
    plan = make_smoothing_plan(problem, spec.eps_target)
    inner = _inner(spec)
    if inner not in (InnerSolver.FGM_DUAL, InnerSolver.FGM_PRIMAL):
        inner = InnerSolver.FGM_DUAL
    _, trace = run_smoothed_driver(problem, instance.x0, plan, inner=inner, max_outer=spec.max_outer,
                                   check_comparison=spec.check_guarantees)
    return trace


def solve_budgeted(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    """The budget is solver.budget_T, or the total that reaches eps_target from F(x0) - inf F"""
    problem = instance.composite
    T = spec.budget_T
    if T is None:
        F0 = objective_value(problem.fresh(), instance.x0)
        gap0 = F0 - (instance.f_inf if instance.f_inf is not None else 0.0)
        T = int(np.ceil(budget_for_target(problem.L, problem.beta, problem.jac_bound, spec.budget_q,
                                          max(gap0, 0.0), spec.eps_target)))
    plan = make_budget_plan(problem.L, problem.beta, problem.jac_bound, spec.budget_q, T)
    _, trace = run_budgeted_driver(problem, instance.x0, plan, f_inf=instance.f_inf,
                                   check_guarantees=spec.check_guarantees)
    return trace


def solve_accelerated(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_accelerated(instance.composite, instance.x0, instance.x0, _mu_tilde(instance, spec), spec.N,
                           info=_curvature(instance, spec), weights=spec.weights)


def solve_accelerated_dual(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_accelerated_inexact_stationary(instance.composite, instance.x0, instance.x0,
                                              _mu_tilde(instance, spec), spec.N, spec.schedule.build(),
                                              spec.delta_schedule.build(), info=_curvature(instance, spec),
                                              cap=spec.inner_cap)


def solve_accelerated_gap(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    return run_accelerated_inexact_gap(instance.composite, instance.x0, instance.x0, _mu_tilde(instance, spec),
                                       spec.N, spec.schedule.build(), spec.delta_schedule.build(),
                                       info=_curvature(instance, spec), cap=spec.inner_cap)


def solve_accelerated_backtracking(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    problem = instance.composite
    t0 = spec.t0
    if t0 is None:
        t0 = 1.0 / problem.mu if problem.mu > 0 else 1.0
    return run_accelerated_backtracking(problem, instance.x0, instance.x0, t0, spec.eta, spec.alpha_bt, spec.N,
                                        info=_curvature(instance, spec))


def solve_finite_sum(instance: ProblemInstance, spec: SolverConfig) -> Trace:
    if not isinstance(instance.problem, FiniteSumProblem):
        raise ConfigError(f"SolverManager: instance '{instance.name}' is not a finite sum")
    try:
        mode = FiniteSumMode(spec.finite_sum_mode)
    except ValueError:
        raise ConfigError(f"SolverManager: unknown finite-sum mode '{spec.finite_sum_mode}'")
    svrg = SvrgConfig(epochs=spec.svrg_epochs, seed=spec.seed, step_factor=spec.svrg_step_factor,
                      inner_factor=spec.svrg_inner_factor)
    _, trace = run_finite_sum_driver(instance.problem, instance.x0, spec.eps_target, mode=mode, svrg=svrg,
                                     max_outer=spec.max_outer)
    return trace


DEFAULT_SOLVERS: Dict[str, SolverFn] = {
    "prox_linear": solve_prox_linear,
    "inexact_gap": solve_inexact_gap,
    "inexact_dual": solve_inexact_dual,
    "coupled_fgm": solve_coupled_fgm,
    "smoothed": solve_smoothed,
    "budgeted": solve_budgeted,
    "accelerated": solve_accelerated,
    "accelerated_dual": solve_accelerated_dual,
    "accelerated_gap": solve_accelerated_gap,
    "accelerated_backtracking": solve_accelerated_backtracking,
    "finite_sum": solve_finite_sum,
}


class SolverManager:
    """
    Solver Manager: Dispatches named solvers on problem instances.

    Responsibilities:
    - Register solver adapters under unique names
    - Run a solver spec on an instance and return its trace
    - Catch solver errors at the boundary and keep the last message
    """

    def __init__(self, register_defaults: bool = True):
        self.solvers: Dict[str, SolverFn] = {}
        self.last_error: Optional[str] = None
        if register_defaults:
            for name, fn in DEFAULT_SOLVERS.items():
                self.register_solver(name, fn)
        logger.info(f"SolverManager: Initialized with {len(self.solvers)} solvers")

    def register_solver(self, name: str, fn: SolverFn) -> bool:
        """
        Register a solver adapter.

        Args:
            name: Unique solver name used in configs
            fn: Callable (instance, spec) -> Trace

        Returns:
            bool: True if registered, False if the name is taken
        """
        if name in self.solvers:
            logger.error(f"SolverManager: Solver '{name}' already registered")
            return False
        self.solvers[name] = fn
        logger.debug(f"SolverManager: Registered solver '{name}'")
        return True

    def has_solver(self, name: str) -> bool:
        return name in self.solvers

    def list_solvers(self) -> List[str]:
        return sorted(self.solvers)

    def run(self, instance: ProblemInstance, spec: SolverConfig) -> Optional[Trace]:
        """
        Run one solver spec on an instance.

        Returns:
            Trace: The run's trace, or None when the solver raised (see last_error)

        Raises:
            ConfigError: for an unknown solver name or an unusable spec
        """
        if spec.name not in self.solvers:
            raise ConfigError(f"SolverManager: Solver '{spec.name}' not found, choose from {self.list_solvers()}")
        label = spec.label or spec.name
        self.last_error = None
        try:
            trace = self.solvers[spec.name](instance, spec)
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f"SolverManager: Invalid parameters for '{label}': {str(e)}")
        except SolverError as e:
            self.last_error = f"{type(e).__name__}: {str(e)}"
            logger.error(f"SolverManager: Error running '{label}' on '{instance.name}': {str(e)}")
            return None
        trace.solver = label
        logger.info(f"SolverManager: '{label}' on '{instance.name}' finished with "
                    f"{len(trace.failed_checks())} failed checks")
        return trace
