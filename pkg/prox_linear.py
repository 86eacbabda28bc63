"""
Prox-Linear Module
Outer loops: exact, inexact (function gap / dual stationarity) and coupled prox-linear methods
"""

import logging
from typing import Any, Optional, Tuple

import numpy as np

from core_engine import CompositeProblem, as_vector
from data_models import InnerSolver, ProxLinearConfig, StoppingRule, SubproblemSolution, Trace
from errors import InvalidRateConstants, StepIncreasedObjective
from fast_gradient import fgm_run
from interfaces import LinearlyConvergentSubscheme
from performance_monitor import PerformanceMonitor
from subproblem import (LinearizedModel, build_model, dual_fgm_inner_count, model_value, primal_instance,
                        reference_step, solve_dual_stationary, solve_exact, solve_primal_fgm, solve_to_gap)

logger = logging.getLogger(__name__)


def resolve_step(problem: CompositeProblem, cfg: ProxLinearConfig) -> float:
    """cfg.t, or 1/mu by default"""
    if cfg.t is not None:
        return float(cfg.t)
    if problem.mu <= 0:
        raise ValueError("resolve_step: mu = 0, an explicit step t is required")
    return 1.0 / problem.mu


def _slack(cfg: ProxLinearConfig, F: float) -> float:
    return cfg.descent_slack * (1.0 + abs(F))


def step_error(t: float, G_norm: float, gap: float) -> float:
    """
    Descent a step can lose when solved to model gap `gap` instead of exactly.

    F(y) - F(x) >= (t/2) |G|^2 - |G| sqrt(2 t gap) - gap for x within gap of
    the minimizer of F_t(.; y) and G = (y - x) / t.
    """
    return G_norm * float(np.sqrt(2.0 * t * gap)) + gap


def _exact_step(cfg: ProxLinearConfig, model: LinearizedModel, warm) -> SubproblemSolution:
    """S_t(y) to gap exact_rel_tol (1 + |F(y)|), or the best certified point within exact_cap"""
    return solve_exact(model, tol=cfg.exact_rel_tol * (1.0 + abs(model.center_value())), w0=warm,
                       cap=cfg.exact_cap, strict=False)


class _OuterState:
    """Bookkeeping shared by the outer loops"""

    def __init__(self, name: str, problem: CompositeProblem, x0, cfg: ProxLinearConfig):
        self.problem = problem.fresh()
        self.cfg = cfg
        self.t = resolve_step(self.problem, cfg)
        self.monitor = PerformanceMonitor(name, self.problem.counters)
        self.x = as_vector(x0)
        self.model = build_model(self.problem, self.x, self.t)
        self.F = self.model.center_value()
        self.F0 = self.F
        self.F_best = self.F
        self.min_true_G2 = np.inf
        self.eps_sum = 0.0
        self.lost_sum = 0.0
        self.dual_warm: Optional[np.ndarray] = None
        logger.info(f"ProxLinear: {name} started, t={self.t:.6g}, F0={self.F0:.10g}")

    def true_G(self) -> Optional[np.ndarray]:
        if not self.cfg.reference_grad:
            return None
        return reference_step(self.problem, self.x, self.t)[1]

    def advance(self, x_next: np.ndarray) -> float:
        """Move to x_next; returns F(x_next)"""
        self.x = np.asarray(x_next, dtype=float)
        self.model = build_model(self.problem, self.x, self.t)
        self.F = self.model.center_value()
        self.F_best = min(self.F_best, self.F)
        return self.F


def run_prox_linear(problem: CompositeProblem, x0, cfg: Optional[ProxLinearConfig] = None) -> Trace:
    """
    Exact prox-linear method x_{k+1} = S_t(x_k).

    Args:
        problem: Composite problem
        x0: Starting point in dom g
        cfg: Step, max_outer, stop tolerance on |G_t|

    Returns:
        Trace: One record per iterate with |G_t(x_k)|

    Raises:
        StepIncreasedObjective: when F(x_k) - F(x_{k+1}) < (t/2) |G_t(x_k)|^2
    """
    cfg = cfg or ProxLinearConfig()
    st = _OuterState("prox_linear", problem, x0, cfg)
    t = st.t
    for k in range(cfg.max_outer + 1):
        sol = _exact_step(cfg, st.model, st.dual_warm)
        st.dual_warm = sol.dual
        G = (st.x - sol.x_plus) / t
        Gn = float(np.linalg.norm(G))
        st.monitor.record_iterate(k, st.F, Gn, step_norm=t * Gn, x=st.x.copy(), inner_iters=sol.inner_iters,
                                  extra={"subproblem_gap": sol.value})
        st.min_true_G2 = min(st.min_true_G2, Gn ** 2)
        if Gn <= cfg.stop_tol or k == cfg.max_outer:
            break
        F_prev = st.F
        F_next = st.advance(sol.x_plus)
        lost = step_error(t, Gn, sol.value)
        st.lost_sum += lost
        if cfg.check_guarantees:
            check = st.monitor.record_check("descent_exact", k, 0.5 * t * Gn ** 2, F_prev - F_next,
                                            slack=_slack(cfg, F_prev) + lost)
            if not check.passed:
                st.monitor.finish(st.x)
                raise StepIncreasedObjective(
                    f"run_prox_linear: step {k} decreased F by {F_prev - F_next:.6e} < (t/2)|G|^2 = {0.5 * t * Gn ** 2:.6e}")
            N = k + 1
            st.monitor.record_check("min_grad_exact", N, st.min_true_G2,
                                    2.0 * (st.F0 - F_next + st.lost_sum) / (t * N),
                                    slack=_slack(cfg, st.F0) / t)
    return st.monitor.finish(st.x)


def _solve_gap(cfg: ProxLinearConfig, model: LinearizedModel, eps: float, warm) -> SubproblemSolution:
    if eps <= 0.0:
        return _exact_step(cfg, model, warm)
    if cfg.inner == InnerSolver.FGM_PRIMAL:
        return solve_primal_fgm(model, eps, cap=cfg.inner_cap)
    return solve_to_gap(model, eps, w0=warm, cap=cfg.inner_cap)


def run_inexact_function_gap(problem: CompositeProblem, x0, cfg: Optional[ProxLinearConfig] = None) -> Trace:
    """
    Inexact prox-linear method where step k+1 is certified to functional gap eps_{k+1}.

    The recorded prox_grad_norm is the surrogate sqrt(4 eps/t + 2 |(x+ - x)/t|^2).
    With cfg.reference_grad the true |G_t| is recorded and the N-step bound
    min |G_t|^2 <= 2 (F0 - F_best + sum eps) / (t N) is checked.
    """
    cfg = cfg or ProxLinearConfig()
    st = _OuterState("inexact_gap", problem, x0, cfg)
    t = st.t
    for k in range(cfg.max_outer + 1):
        eps = cfg.schedule.eps(k + 1)
        sol = _solve_gap(cfg, st.model, eps, st.dual_warm)
        st.dual_warm = sol.dual
        step = (sol.x_plus - st.x) / t
        surrogate = float(np.sqrt(4.0 * sol.value / t + 2.0 * np.dot(step, step)))
        G_true = st.true_G()
        true_norm = None if G_true is None else float(np.linalg.norm(G_true))
        st.monitor.record_iterate(k, st.F, surrogate, step_norm=t * float(np.linalg.norm(step)),
                                  x=st.x.copy(), inner_iters=sol.inner_iters, eps_k=eps, prox_grad_true=true_norm,
                                  extra={"certified_gap": sol.value})
        if true_norm is not None and cfg.check_guarantees:
            st.monitor.record_check("surrogate_function_gap", k, true_norm ** 2, surrogate ** 2,
                                    slack=1e-9 * (1.0 + surrogate ** 2))
            st.min_true_G2 = min(st.min_true_G2, true_norm ** 2)
        if surrogate <= cfg.stop_tol or k == cfg.max_outer:
            break
        F_prev = st.F
        F_next = st.advance(sol.x_plus)
        eps_cert = eps if eps > 0 else sol.value
        st.eps_sum += eps_cert
        if true_norm is not None and cfg.check_guarantees:
            st.monitor.record_check("descent_function_gap", k, F_next,
                                    F_prev - 0.5 * t * true_norm ** 2 + eps_cert, slack=_slack(cfg, F_prev))
            N = k + 1
            st.monitor.record_check("min_grad_function_gap", N, st.min_true_G2,
                                    2.0 * (st.F0 - st.F_best + st.eps_sum) / (t * N),
                                    slack=_slack(cfg, st.F0) / t)
    return st.monitor.finish(st.x)


def run_inexact_dual_stationary(problem: CompositeProblem, x0, cfg: Optional[ProxLinearConfig] = None) -> Trace:
    """
    Inexact prox-linear method driven by dual near-stationarity |zeta_{k+1}| <= eps_{k+1}.

    Per step F(x_{k+1}) <= F(x_k) + 2 L eps - |x_{k+1} - x_k|^2 / (2t) is checked;
    the surrogate sqrt(8 L |zeta| / t + 2 |(x+ - x)/t|^2) is recorded.

    Raises:
        DualBudgetExhausted: when the dual target is not met within cfg.inner_cap
    """
    cfg = cfg or ProxLinearConfig()
    st = _OuterState("inexact_dual", problem, x0, cfg)
    t, L = st.t, st.problem.L
    L_h = st.problem.h.gradient_lipschitz
    for k in range(cfg.max_outer + 1):
        eps = cfg.schedule.eps(k + 1)
        if eps > 0:
            sol = solve_dual_stationary(st.model, eps, w0=st.dual_warm, cap=cfg.inner_cap)
        else:
            sol = _exact_step(cfg, st.model, st.dual_warm)
        st.dual_warm = sol.dual
        zeta_norm = sol.value if eps > 0 else 0.0
        step = (sol.x_plus - st.x) / t
        surrogate = float(np.sqrt(8.0 * L * zeta_norm / t + 2.0 * np.dot(step, step)))
        G_true = st.true_G()
        true_norm = None if G_true is None else float(np.linalg.norm(G_true))
        st.monitor.record_iterate(k, st.F, surrogate, step_norm=t * float(np.linalg.norm(step)),
                                  x=st.x.copy(), inner_iters=sol.inner_iters, eps_k=eps, prox_grad_true=true_norm,
                                  extra={"zeta_norm": zeta_norm})
        if cfg.check_guarantees and eps > 0 and L_h is not None and L_h > 0:
            bound = dual_fgm_inner_count(t, st.model.jac_norm, L_h, L, eps)
            st.monitor.record_check("dual_inner_count", k, sol.inner_iters, bound)
        if true_norm is not None and cfg.check_guarantees:
            st.monitor.record_check("surrogate_dual", k, true_norm ** 2, surrogate ** 2,
                                    slack=1e-9 * (1.0 + surrogate ** 2))
            st.min_true_G2 = min(st.min_true_G2, true_norm ** 2)
        if surrogate <= cfg.stop_tol or k == cfg.max_outer:
            break
        F_prev = st.F
        F_next = st.advance(sol.x_plus)
        st.eps_sum += eps
        dx = t * float(np.linalg.norm(step))
        lost = 0.0 if eps > 0 else step_error(t, dx / t, sol.value)
        st.lost_sum += lost
        if cfg.check_guarantees:
            st.monitor.record_check("descent_dual", k, F_next, F_prev + 2.0 * L * eps - dx ** 2 / (2.0 * t),
                                    slack=_slack(cfg, F_prev) + lost)
            if true_norm is not None:
                N = k + 1
                st.monitor.record_check("min_grad_dual", N, st.min_true_G2,
                                        4.0 * (st.F0 - st.F_best + 4.0 * L * st.eps_sum + st.lost_sum) / (t * N),
                                        slack=_slack(cfg, st.F0) / t)
    return st.monitor.finish(st.x)


# ============================================================================
# COUPLED SCHEME
# ============================================================================

def coupled_inner_count(t: float, gamma: float, tau: float) -> int:
    """T = ceil((1/tau) log(4 t gamma)), floored at one inner iteration"""
    if not 0.0 < tau < 1.0 or gamma < 0.0:
        raise InvalidRateConstants(f"coupled_inner_count: need gamma >= 0 and tau in (0,1), got ({gamma}, {tau})")
    if gamma == 0.0:
        return 1
    return max(1, int(np.ceil(np.log(4.0 * t * gamma) / tau)))


def fgm_subscheme_constants(L_f: float, alpha: float) -> Tuple[float, float]:
    """(gamma, tau) = (L_f/4, sqrt(alpha/(2 L_f)))"""
    return 0.25 * L_f, float(np.sqrt(alpha / (2.0 * L_f)))


def plus_constants(gamma: float, tau: float, L_f: float) -> Tuple[float, float]:
    """Constants after prepending one prox-gradient step: (gamma L_f / 2, tau)"""
    return 0.5 * gamma * L_f, tau


class FgmSubscheme(LinearlyConvergentSubscheme):
    """Primal fast gradient on F_t(.; y); needs smooth h"""

    name = "fgm"
    max_tau = 0.5

    def constants(self, model: LinearizedModel) -> Tuple[float, float]:
        inst = primal_instance(model)
        gamma, tau = fgm_subscheme_constants(inst.L_f, inst.alpha)
        return gamma, min(tau, self.max_tau)

    def run(self, model: LinearizedModel, z0: np.ndarray, n_iters: int) -> np.ndarray:
        x, _ = fgm_run(primal_instance(model), z0, StoppingRule.fixed(n_iters), track_values=False)
        return x


class PlusSubscheme(LinearlyConvergentSubscheme):
    """
    A method with a functional rate gamma (1-tau)^i (f^p(z0) - f^p*) made
    into a subscheme by one prox-gradient step before it starts.

    The wrapped object provides instance(model), functional_constants(inst)
    and run_instance(inst, z0, n_iters).
    """

    def __init__(self, inner: Any):
        self.inner = inner
        self.name = f"{getattr(inner, 'name', 'method')}+"

    def constants(self, model: LinearizedModel) -> Tuple[float, float]:
        inst = self.inner.instance(model)
        gamma, tau = self.inner.functional_constants(inst)
        return plus_constants(gamma, tau, inst.L_f)

    def run(self, model: LinearizedModel, z0: np.ndarray, n_iters: int) -> np.ndarray:
        inst = self.inner.instance(model)
        return self.inner.run_instance(inst, inst.prox_grad_step(np.asarray(z0, dtype=float)), n_iters)


def wrap_plus(inner: Any) -> LinearlyConvergentSubscheme:
    """Subscheme M+ built from a method with a functional linear rate"""
    return PlusSubscheme(inner)


def run_coupled(problem: CompositeProblem, x0, cfg: ProxLinearConfig) -> Trace:
    """
    Prox-linear steps each made of exactly T_k inner iterations of a
    linearly convergent subscheme warm-started at x_k.

    With cfg.reference_grad the (t/4) descent, the subproblem progress
    F_t(x_{k+1}; x_k) - min <= |x_k - x*_k|^2 / (4t) and the N-step bound
    min |G_t|^2 <= 4 (F0 - F_best) / (t N) are checked.

    Raises:
        InvalidRateConstants: when a step yields tau outside (0, 1)
    """
    scheme: LinearlyConvergentSubscheme = cfg.subscheme
    if scheme is None:
        scheme = FgmSubscheme()
    # expectation-valued guarantees are checked across seeds by the caller
    per_step_checks = cfg.check_guarantees and not getattr(scheme, "stochastic", False)
    st = _OuterState(f"coupled_{scheme.name}", problem, x0, cfg)
    t = st.t
    for k in range(cfg.max_outer + 1):
        gamma, tau = scheme.constants(st.model)
        T = coupled_inner_count(t, gamma, tau)
        x_next = scheme.run(st.model, st.x, T)
        step = (x_next - st.x) / t
        ref = reference_step(st.problem, st.x, t) if cfg.reference_grad else None
        true_norm = None if ref is None else float(np.linalg.norm(ref[1]))
        st.monitor.record_iterate(k, st.F, float(np.linalg.norm(step)), step_norm=t * float(np.linalg.norm(step)),
                                  x=st.x.copy(), inner_iters=T, prox_grad_true=true_norm,
                                  extra={"gamma": gamma, "tau": tau})
        if true_norm is not None:
            st.min_true_G2 = min(st.min_true_G2, true_norm ** 2)
        if (true_norm if true_norm is not None else np.linalg.norm(step)) <= cfg.stop_tol or k == cfg.max_outer:
            break
        if ref is not None and per_step_checks:
            x_star = ref[0]
            d = st.x - x_star
            uncounted = build_model(st.problem.fresh(), st.x, t)
            progress = model_value(uncounted, x_next) - model_value(uncounted, x_star)
            st.monitor.record_check("subproblem_progress", k, progress, float(np.dot(d, d)) / (4.0 * t),
                                    slack=_slack(cfg, st.F))
        F_prev = st.F
        F_next = st.advance(x_next)
        st.monitor.trace.records[-1].extra["F_decrease"] = F_prev - F_next
        if true_norm is not None and per_step_checks:
            st.monitor.record_check("descent_coupled", k, 0.25 * t * true_norm ** 2, F_prev - F_next,
                                    slack=_slack(cfg, F_prev))
            N = k + 1
            st.monitor.record_check("min_grad_coupled", N, st.min_true_G2,
                                    4.0 * (st.F0 - st.F_best) / (t * N), slack=_slack(cfg, st.F0) / t)
    return st.monitor.finish(st.x)
