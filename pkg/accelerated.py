"""
Accelerated Module
Inertial prox-linear methods with the two-center mapping, inexact variants and backtracking
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core_engine import CompositeProblem, as_vector, objective_value
from data_models import AccelState, BacktrackState, ErrorSchedule, SubproblemSolution, Trace
from errors import BudgetExhausted, InvalidMuTilde
from fast_gradient import optimal_method_next_weight
from performance_monitor import PerformanceMonitor
from prox_toolbox import ScaledFunction
from subproblem import (DEFAULT_INNER_CAP, EXACT_REL_TOL, LinearizedModel, build_model, model_value,
                        reference_step, solve_dual_stationary, solve_exact, solve_to_gap)

logger = logging.getLogger(__name__)

WEIGHTS_STANDARD = "standard"
WEIGHTS_FISTA = "fista"
# extra shrinks allowed past the declared-constant trial bound
BACKTRACK_TRIAL_MARGIN = 60


# ============================================================================
# TWO-CENTER SUBPROBLEM
# ============================================================================

def build_two_center(problem: CompositeProblem, y: np.ndarray, v: np.ndarray, t: float, alpha: float,
                     c_y: Optional[np.ndarray] = None) -> LinearizedModel:
    """
    F_{t,alpha}(z; y, v) = g(z) + (1/alpha) h(c(y) + alpha grad c(y)(z - v)) + |z - v|^2 / (2t).

    alpha = 1 and v = y give the standard model F_t(.; y).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"build_two_center: alpha must lie in (0, 1], got {alpha}")
    y = np.asarray(y, dtype=float)
    if c_y is None:
        c_y = problem.c_eval(y)
    h = problem.h if alpha == 1.0 else ScaledFunction(problem.h, 1.0 / alpha)
    return LinearizedModel(problem=problem, y=y, center=np.asarray(v, dtype=float), c_y=c_y, t=t, h=h,
                           jac_norm=problem.jac_norm_at(y), jac_scale=alpha)


def two_center_value(m: LinearizedModel, z: np.ndarray) -> float:
    """F_alpha(z; y, v): the two-center model without its proximal term"""
    d = np.asarray(z, dtype=float) - m.center
    return model_value(m, z) - float(np.dot(d, d)) / (2.0 * m.t)


def three_point_gap(m: LinearizedModel, z: np.ndarray, w: np.ndarray) -> float:
    """
    F_alpha(z) - F_alpha(w) - (|w - v|^2 - |w - z|^2 - |z - v|^2) / (2t);
    nonpositive when z minimizes F_{t,alpha}(.; y, v).
    """
    v = m.center
    quad = (np.sum((w - v) ** 2) - np.sum((w - z) ** 2) - np.sum((z - v) ** 2)) / (2.0 * m.t)
    return two_center_value(m, z) - two_center_value(m, w) - float(quad)


def solve_two_center(m: LinearizedModel, tol: float, w0: Optional[np.ndarray] = None,
                     cap: int = DEFAULT_INNER_CAP) -> np.ndarray:
    """
    S_{t,alpha}(y, v) to functional gap tol.

    Raises:
        BudgetExhausted: when the dual solver cannot certify tol
    """
    return solve_to_gap(m, tol, w0=w0, cap=cap).x_plus


# ============================================================================
# WEIGHTS AND BOUNDS
# ============================================================================

def accel_weights(N: int, weights: str = WEIGHTS_STANDARD) -> List[float]:
    """a_1..a_N: 2/(k+1), or the FISTA sequence (1 - a_k)/a_k^2 = 1/a_{k-1}^2 with a_1 = 1"""
    if weights == WEIGHTS_STANDARD:
        return [2.0 / (k + 1) for k in range(1, N + 1)]
    if weights == WEIGHTS_FISTA:
        out, a = [], 1.0
        for _ in range(N):
            out.append(a)
            a = optimal_method_next_weight(a)
        return out
    raise ValueError(f"accel_weights: unknown weights '{weights}'")


def _curvature_term(M: Optional[float], r: float, rho: float, N: int) -> Optional[float]:
    """M^2 (r + (rho/2)(N+3)), zero when r = 0; None when M is needed but unknown"""
    if r == 0.0:
        return 0.0
    if M is None or not np.isfinite(M):
        return None
    return M ** 2 * (r + 0.5 * rho * (N + 3))


def accelerated_grad_bound(N: int, mu_tilde: float, mu: float, dist0_sq: float, M: Optional[float],
                           r: float, rho: float) -> Optional[float]:
    """min_j |G_{1/mu~}(y_j)|^2 bound of the exact accelerated method"""
    curv = _curvature_term(M, r, rho, N)
    if curv is None:
        return None
    return 24.0 * mu_tilde ** 2 / (mu_tilde - mu) * (
        mu_tilde * dist0_sq / (N * (N + 1) * (2 * N + 1)) + curv / ((N + 1) * (2 * N + 1)))


def accelerated_value_bound(N: int, mu_tilde: float, dist0_sq: float) -> float:
    """F(x_N) - F(x*) <= 2 mu~ |x* - v0|^2 / (N+1)^2 when r = 0"""
    return 2.0 * mu_tilde * dist0_sq / (N + 1) ** 2


def inexact_stationary_grad_bound(N: int, mu_tilde: float, mu: float, dist0_sq: float, M: Optional[float],
                                  r: float, rho: float, L: float, eps: List[float], delta: List[float],
                                  a: List[float]) -> Optional[float]:
    """Bound for the dual-stationary variant; the |x* - v0|^2 term carries mu~ as in the exact case"""
    curv = _curvature_term(M, r, rho, N)
    if curv is None:
        return None
    err = 4.0 * L * sum((2.0 * e + d) / ai ** 2 for e, d, ai in zip(eps[:N], delta[:N], a[:N]))
    denom = N * (N + 1) * (2 * N + 1)
    return 48.0 * mu_tilde ** 2 / (mu_tilde - mu) * (
        mu_tilde * dist0_sq / denom + curv / ((N + 1) * (2 * N + 1)) + err / denom)


def inexact_stationary_value_bound(N: int, mu_tilde: float, dist0_sq: float, L: float,
                                   eps: List[float], delta: List[float], a: List[float]) -> float:
    err = 8.0 * L * sum((e + d) / ai ** 2 for e, d, ai in zip(eps[:N], delta[:N], a[:N]))
    return (2.0 * mu_tilde * dist0_sq + err) / (N + 1) ** 2


def gap_constant_A(N: int, mu_tilde: float, mu: float, dist0_sq: float, M: Optional[float], r: float,
                   rho: float, eps: List[float], delta: List[float], a: List[float]) -> Dict[str, float]:
    """
    The constant A_N bounding |x* - v_N| for the near-optimality variant.

    Returns both the closed-form bound ("stated") and the form accumulated
    in its proof ("proof", with 2/mu in front of the squared root sum).
    """
    curv = _curvature_term(M, r, rho, N)
    if curv is None:
        return {"stated": np.inf, "proof": np.inf}
    roots = sum(np.sqrt(d / ai) for d, ai in zip(delta[:N], a[:N]))
    errs = sum((d * ai + 2.0 * e) / ai ** 2 for e, d, ai in zip(eps[:N], delta[:N], a[:N]))
    head = np.sqrt(2.0 / mu_tilde) * roots
    base = dist0_sq + N * curv / mu_tilde + 2.0 / mu_tilde * errs
    stated = head + np.sqrt(base + 2.0 / mu_tilde * roots ** 2)
    proof = stated if mu <= 0 else head + np.sqrt(base + 2.0 / mu * roots ** 2)
    return {"stated": float(stated), "proof": float(proof)}


def inexact_gap_grad_bound(N: int, mu_tilde: float, mu: float, dist0_sq: float, M: Optional[float],
                           r: float, rho: float, eps: List[float], delta: List[float], a: List[float],
                           A_N: float) -> Optional[float]:
    curv = _curvature_term(M, r, rho, N)
    if curv is None:
        return None
    roots = sum(np.sqrt(d / ai) for d, ai in zip(delta[:N], a[:N]))
    errs = sum((d * ai + 3.0 * e) / ai ** 2 for e, d, ai in zip(eps[:N], delta[:N], a[:N]))
    denom = N * (N + 1) * (2 * N + 1)
    return 96.0 * mu_tilde ** 2 / (mu_tilde - mu) * (
        mu_tilde * dist0_sq / (2.0 * denom) + curv / (2.0 * (N + 1) * (2 * N + 1))
        + (errs + A_N * np.sqrt(2.0 * mu_tilde) * roots) / denom)


def inexact_gap_value_bound(N: int, mu_tilde: float, dist0_sq: float, eps: List[float], delta: List[float],
                            a: List[float], A_N: float) -> float:
    roots = sum(np.sqrt(d / ai) for d, ai in zip(delta[:N], a[:N]))
    errs = sum((d * ai + 2.0 * e) / ai ** 2 for e, d, ai in zip(eps[:N], delta[:N], a[:N]))
    return (2.0 * mu_tilde * dist0_sq + 4.0 * errs + 4.0 * A_N * np.sqrt(2.0 * mu_tilde) * roots) / (N + 1) ** 2


def backtrack_trial_bound(t: float, mu: float, eta: float) -> int:
    """1 + ceil(log(t mu) / log(1/eta)) evaluations of S, at least one"""
    if t * mu <= 1.0:
        return 1
    return 1 + int(np.ceil(np.log(t * mu) / np.log(1.0 / eta)))


# ============================================================================
# SHARED LOOP
# ============================================================================

@dataclass
class AccelHistory:
    """Iterates of an accelerated run; index 0 holds x_0, v_0"""
    states: List[AccelState] = field(default_factory=list)
    F: List[float] = field(default_factory=list)
    G_sq: List[float] = field(default_factory=list)
    eps: List[float] = field(default_factory=list)
    delta: List[float] = field(default_factory=list)
    a: List[float] = field(default_factory=list)


@dataclass
class _Step:
    x: np.ndarray
    v: np.ndarray
    G_norm: float
    inner_iters: int = 0
    eps: float = 0.0
    delta: float = 0.0
    mu_tilde: float = 0.0
    extra: Dict[str, float] = field(default_factory=dict)


StepFn = Callable[[CompositeProblem, int, float, np.ndarray, np.ndarray], _Step]


def _check_mu_tilde(problem: CompositeProblem, mu_tilde: float) -> None:
    if not mu_tilde > problem.mu:
        raise InvalidMuTilde(f"accelerated: mu_tilde={mu_tilde} must exceed mu={problem.mu}")


def _exact_tol(m: LinearizedModel) -> float:
    return EXACT_REL_TOL * (1.0 + abs(m.center_value()))


def _run_loop(name: str, problem: CompositeProblem, x0, v0, N: int, weights: str,
              step_fn: StepFn) -> Tuple[CompositeProblem, PerformanceMonitor, AccelHistory]:
    prob = problem.fresh()
    monitor = PerformanceMonitor(name, prob.counters)
    x, v = as_vector(x0), as_vector(v0)
    hist = AccelHistory()
    hist.states.append(AccelState(k=0, a=1.0, x=x, v=v, y=x, mu_tilde=0.0))
    hist.F.append(objective_value(prob, x))
    for k, a in enumerate(accel_weights(N, weights), start=1):
        y = a * v + (1.0 - a) * x
        step = step_fn(prob, k, a, y, v)
        F = objective_value(prob, step.x)
        monitor.record_iterate(k, F, step.G_norm, step_norm=float(np.linalg.norm(step.x - x)),
                               inner_iters=step.inner_iters, eps_k=step.eps, delta_k=step.delta,
                               x=step.x.copy(), extra={"a": a, "mu_tilde": step.mu_tilde, **step.extra})
        x, v = step.x, step.v
        hist.states.append(AccelState(k=k, a=a, x=x, v=v, y=y, mu_tilde=step.mu_tilde))
        hist.F.append(F)
        hist.G_sq.append(step.G_norm ** 2)
        hist.eps.append(step.eps)
        hist.delta.append(step.delta)
        hist.a.append(a)
    logger.info(f"Accelerated: {name} finished {N} steps, F={hist.F[-1]:.10g}")
    return prob, monitor, hist


def _x_star_ok(monitor: PerformanceMonitor, hist: AccelHistory, F_star: float) -> bool:
    worst = min(hist.F[1:]) if len(hist.F) > 1 else np.inf
    if F_star > worst + 1e-8 * (1.0 + abs(worst)):
        monitor.record_check("x_star_reference", 0, F_star, worst, skipped=True,
                             note="reference point is worse than an iterate; bounds skipped")
        return False
    return True


def _record_bounds(monitor: PerformanceMonitor, hist: AccelHistory, prefix: str, F_star: Optional[float],
                   grad_bound: Callable[[int], Optional[float]],
                   value_bound: Optional[Callable[[int], float]]) -> None:
    N_total = len(hist.G_sq)
    valid = F_star is None or _x_star_ok(monitor, hist, F_star)
    for N in range(1, N_total + 1):
        min_G2 = min(hist.G_sq[:N])
        scale = 1e-8 * (1.0 + abs(hist.F[N]))
        rhs = grad_bound(N) if valid else None
        if rhs is None:
            monitor.record_check(f"{prefix}_min_grad", N, min_G2, np.inf, skipped=True,
                                 note="needs a valid reference point and M")
        else:
            monitor.record_check(f"{prefix}_min_grad", N, min_G2, rhs, slack=scale)
        if value_bound is not None and F_star is not None and valid:
            monitor.record_check(f"{prefix}_value", N, hist.F[N] - F_star, value_bound(N), slack=scale)


@dataclass
class CurvatureInfo:
    """Reference point and curvature metadata used by the bound checks"""
    x_star: Optional[np.ndarray] = None
    rho: Optional[float] = None
    r: Optional[float] = None
    M: Optional[float] = None

    def resolved(self, problem: CompositeProblem) -> Tuple[float, float]:
        """(rho, r), defaulting to the worst case mu"""
        rho = problem.mu if self.rho is None else self.rho
        r = problem.mu if self.r is None else self.r
        return rho, r


def _reference(problem: CompositeProblem, info: CurvatureInfo, v0: np.ndarray) -> Tuple[Optional[float], float]:
    if info.x_star is None:
        return None, np.inf
    x_star = as_vector(info.x_star)
    return objective_value(problem.fresh(), x_star), float(np.sum((x_star - v0) ** 2))


# ============================================================================
# ALGORITHMS
# ============================================================================

def run_accelerated(problem: CompositeProblem, x0, v0, mu_tilde: float, N: int,
                    info: Optional[CurvatureInfo] = None, weights: str = WEIGHTS_STANDARD) -> Trace:
    """
    Accelerated prox-linear method.

    a_k = 2/(k+1) (or FISTA weights), y_k = a_k v_{k-1} + (1 - a_k) x_{k-1},
    x_k = S_{1/mu~}(y_k), v_k = S_{1/(mu~ a_k), a_k}(y_k, v_{k-1}).

    Args:
        problem: Composite problem
        x0, v0: Starting points in dom g
        mu_tilde: mu~ > mu
        N: Number of steps
        info: Reference point x* and (rho, r, M) for the bound checks
        weights: "standard" or "fista"

    Returns:
        Trace: records k = 1..N with |G_{1/mu~}(y_k)|

    Raises:
        InvalidMuTilde: when mu_tilde <= mu
    """
    _check_mu_tilde(problem, mu_tilde)
    info = info or CurvatureInfo()
    t = 1.0 / mu_tilde

    def step(prob, k, a, y, v):
        c_y = prob.c_eval(y)
        mx = build_model(prob, y, t, c_y=c_y)
        sx = solve_exact(mx, _exact_tol(mx))
        mv = build_two_center(prob, y, v, t / a, a, c_y=c_y)
        sv = solve_exact(mv, _exact_tol(mv))
        return _Step(x=sx.x_plus, v=sv.x_plus, G_norm=mu_tilde * float(np.linalg.norm(y - sx.x_plus)),
                     inner_iters=sx.inner_iters + sv.inner_iters, mu_tilde=mu_tilde)

    prob, monitor, hist = _run_loop(f"accelerated_{weights}", problem, x0, v0, N, weights, step)
    rho, r = info.resolved(prob)
    F_star, dist0_sq = _reference(prob, info, as_vector(v0))
    if F_star is not None:
        _record_bounds(monitor, hist, "accelerated", F_star,
                       lambda n: accelerated_grad_bound(n, mu_tilde, prob.mu, dist0_sq, info.M, r, rho),
                       (lambda n: accelerated_value_bound(n, mu_tilde, dist0_sq)) if r == 0.0 else None)
        if info.rho is not None and info.r is not None:
            _record_telescoping(monitor, prob, hist, as_vector(info.x_star), F_star, mu_tilde, rho, r)
    return monitor.finish(hist.states[-1].x)


def telescoping_rhs(F_x: float, F_prev: float, a: float, mu_tilde: float, mu: float, rho: float, r: float,
                    x: np.ndarray, state_prev: AccelState, state: AccelState) -> float:
    """Right-hand side of the per-step telescoping inequality bounding F(x_k)"""
    d_prev = float(np.sum((x - state_prev.v) ** 2))
    d_now = float(np.sum((x - state.v) ** 2))
    return (a * F_x + (1.0 - a) * F_prev + 0.5 * mu_tilde * a ** 2 * (d_prev - d_now)
            - 0.5 * (mu_tilde - mu) * float(np.sum((state.y - state.x) ** 2))
            + rho * a * float(np.sum((x - state_prev.x) ** 2)) + 0.5 * r * a ** 2 * d_prev)


def _record_telescoping(monitor: PerformanceMonitor, prob: CompositeProblem, hist: AccelHistory,
                        x_star: np.ndarray, F_star: float, mu_tilde: float, rho: float, r: float) -> None:
    for k in range(1, len(hist.states)):
        rhs = telescoping_rhs(F_star, hist.F[k - 1], hist.a[k - 1], mu_tilde, prob.mu, rho, r, x_star,
                              hist.states[k - 1], hist.states[k])
        monitor.record_check("telescoping", k, hist.F[k], rhs, slack=1e-8 * (1.0 + abs(hist.F[k])))


def run_accelerated_inexact_stationary(problem: CompositeProblem, x0, v0, mu_tilde: float, N: int,
                                       eps: ErrorSchedule, delta: ErrorSchedule,
                                       info: Optional[CurvatureInfo] = None,
                                       cap: int = DEFAULT_INNER_CAP) -> Trace:
    """
    Accelerated method where x_k and v_k solve zeta- and xi-perturbed
    subproblems exactly with |zeta_k| <= eps_k and |xi_k| <= delta_k.

    Raises:
        DualBudgetExhausted: when a dual target is not met within cap
    """
    _check_mu_tilde(problem, mu_tilde)
    info = info or CurvatureInfo()
    t = 1.0 / mu_tilde

    def solve(m: LinearizedModel, target: float) -> SubproblemSolution:
        if target <= 0.0:
            return solve_exact(m, _exact_tol(m), cap=cap)
        return solve_dual_stationary(m, target, cap=cap)

    def step(prob, k, a, y, v):
        c_y = prob.c_eval(y)
        e_k, d_k = eps.eps(k), delta.eps(k)
        sx = solve(build_model(prob, y, t, c_y=c_y), e_k)
        sv = solve(build_two_center(prob, y, v, t / a, a, c_y=c_y), d_k)
        G = float(np.linalg.norm(reference_step(prob, y, t)[1]))
        zeta = 0.0 if sx.zeta is None else float(np.linalg.norm(sx.zeta))
        xi = 0.0 if sv.zeta is None else float(np.linalg.norm(sv.zeta))
        return _Step(x=sx.x_plus, v=sv.x_plus, G_norm=G, inner_iters=sx.inner_iters + sv.inner_iters,
                     eps=e_k, delta=d_k, mu_tilde=mu_tilde, extra={"zeta_norm": zeta, "xi_norm": xi})

    prob, monitor, hist = _run_loop("accelerated_dual", problem, x0, v0, N, WEIGHTS_STANDARD, step)
    rho, r = info.resolved(prob)
    F_star, dist0_sq = _reference(prob, info, as_vector(v0))
    if F_star is not None:
        L = prob.L
        _record_bounds(
            monitor, hist, "accelerated_dual", F_star,
            lambda n: inexact_stationary_grad_bound(n, mu_tilde, prob.mu, dist0_sq, info.M, r, rho, L,
                                                    hist.eps, hist.delta, hist.a),
            (lambda n: inexact_stationary_value_bound(n, mu_tilde, dist0_sq, L, hist.eps, hist.delta, hist.a))
            if r == 0.0 else None)
    return monitor.finish(hist.states[-1].x)


def run_accelerated_inexact_gap(problem: CompositeProblem, x0, v0, mu_tilde: float, N: int,
                                eps: ErrorSchedule, delta: ErrorSchedule,
                                info: Optional[CurvatureInfo] = None,
                                cap: int = DEFAULT_INNER_CAP) -> Trace:
    """
    Accelerated method where x_k is an eps_k-approximate and v_k a
    delta_k-approximate minimizer of their subproblems.

    The summary reports A_N in both forms; the checks use the larger one.
    """
    _check_mu_tilde(problem, mu_tilde)
    info = info or CurvatureInfo()
    t = 1.0 / mu_tilde

    def solve(m: LinearizedModel, target: float) -> SubproblemSolution:
        if target <= 0.0:
            return solve_exact(m, _exact_tol(m), cap=cap)
        return solve_to_gap(m, target, cap=cap)

    def step(prob, k, a, y, v):
        c_y = prob.c_eval(y)
        e_k, d_k = eps.eps(k), delta.eps(k)
        sx = solve(build_model(prob, y, t, c_y=c_y), e_k)
        sv = solve(build_two_center(prob, y, v, t / a, a, c_y=c_y), d_k)
        G = float(np.linalg.norm(reference_step(prob, y, t)[1]))
        return _Step(x=sx.x_plus, v=sv.x_plus, G_norm=G, inner_iters=sx.inner_iters + sv.inner_iters,
                     eps=e_k, delta=d_k, mu_tilde=mu_tilde,
                     extra={"gap_x": sx.value, "gap_v": sv.value})

    prob, monitor, hist = _run_loop("accelerated_gap", problem, x0, v0, N, WEIGHTS_STANDARD, step)
    rho, r = info.resolved(prob)
    F_star, dist0_sq = _reference(prob, info, as_vector(v0))
    A: Dict[int, Dict[str, float]] = {}
    if F_star is not None:
        A = {n: gap_constant_A(n, mu_tilde, prob.mu, dist0_sq, info.M, r, rho, hist.eps, hist.delta, hist.a)
             for n in range(1, N + 1)}
        A_used = {n: max(A[n]["stated"], A[n]["proof"]) for n in A}
        _record_bounds(
            monitor, hist, "accelerated_gap", F_star,
            lambda n: inexact_gap_grad_bound(n, mu_tilde, prob.mu, dist0_sq, info.M, r, rho,
                                             hist.eps, hist.delta, hist.a, A_used[n]),
            (lambda n: inexact_gap_value_bound(n, mu_tilde, dist0_sq, hist.eps, hist.delta, hist.a, A_used[n]))
            if r == 0.0 else None)
    trace = monitor.finish(hist.states[-1].x)
    if N in A:
        trace.summary["A_N"] = A[N]
    return trace


def backtrack(problem: CompositeProblem, y: np.ndarray, state: BacktrackState,
              c_y: Optional[np.ndarray] = None) -> Tuple[BacktrackState, np.ndarray]:
    """
    Shrink t by eta until F(S_{alpha t}(y)) <= F_t(S_{alpha t}(y); y).

    Returns:
        Tuple[BacktrackState, np.ndarray]: Accepted state (trials = evaluations of S) and x = S_{alpha t}(y)

    Raises:
        BudgetExhausted: when the trial bound of the declared constants plus
            BACKTRACK_TRIAL_MARGIN trials pass without acceptance
    """
    if c_y is None:
        c_y = problem.c_eval(y)
    t, trials = state.t, 0
    max_trials = backtrack_trial_bound(state.t, problem.mu, state.eta) + BACKTRACK_TRIAL_MARGIN
    while trials < max_trials:
        trials += 1
        m = build_model(problem, y, state.alpha * t, c_y=c_y)
        x = solve_exact(m, _exact_tol(m)).x_plus
        upper = build_model(problem, y, t, c_y=c_y)
        F_x = objective_value(problem, x)
        if F_x <= model_value(upper, x) + 1e-12 * (1.0 + abs(F_x)):
            return BacktrackState(eta=state.eta, alpha=state.alpha, t=t, trials=trials), x
        t *= state.eta
    raise BudgetExhausted(f"backtrack: no accepted step after {trials} trials, last t={t:.3e}")


def run_accelerated_backtracking(problem: CompositeProblem, x0, v0, t0: float, eta: float, alpha_bt: float,
                                 N: int, info: Optional[CurvatureInfo] = None) -> Trace:
    """
    Accelerated prox-linear method with a backtracking step when L and beta are unknown.

    mu~_k = 1/(alpha t_k) never decreases and stays below
    mu~_max = max(1/(alpha t0), mu/(alpha eta)).
    """
    if not (0.0 < eta < 1.0 and 0.0 < alpha_bt < 1.0 and t0 > 0.0):
        raise ValueError("run_accelerated_backtracking: need eta, alpha in (0, 1) and t0 > 0")
    info = info or CurvatureInfo()
    mu = problem.mu
    mu_max = max(1.0 / (alpha_bt * t0), mu / (alpha_bt * eta))
    mu_0 = 1.0 / (alpha_bt * t0)
    holder = {"state": BacktrackState(eta=eta, alpha=alpha_bt, t=t0), "trial_checks": []}

    def step(prob, k, a, y, v):
        c_y = prob.c_eval(y)
        previous = holder["state"]
        state, x = backtrack(prob, y, previous, c_y=c_y)
        holder["state"] = state
        holder["trial_checks"].append((k, state.trials, backtrack_trial_bound(previous.t, mu, eta)))
        mt = state.mu_tilde
        mv = build_two_center(prob, y, v, 1.0 / (mt * a), a, c_y=c_y)
        v_new = solve_exact(mv, _exact_tol(mv)).x_plus
        return _Step(x=x, v=v_new, G_norm=mt * float(np.linalg.norm(y - x)), inner_iters=state.trials,
                     mu_tilde=mt, extra={"t": state.t})

    prob, monitor, hist = _run_loop("accelerated_backtracking", problem, x0, v0, N, WEIGHTS_STANDARD, step)
    for k, trials, bound in holder["trial_checks"]:
        monitor.record_check("backtrack_trials", k, trials, bound)
    for k in range(1, len(hist.states)):
        mt = hist.states[k].mu_tilde
        monitor.record_check("mu_tilde_max", k, mt, mu_max, slack=1e-12 * mu_max)
        if k > 1:
            monitor.record_check("mu_tilde_monotone", k, hist.states[k - 1].mu_tilde, mt)
    rho, r = info.resolved(prob)
    F_star, dist0_sq = _reference(prob, info, as_vector(v0))
    if F_star is not None:
        def grad_bound(n: int) -> Optional[float]:
            curv = _curvature_term(info.M, r, rho, n)
            if curv is None:
                return None
            return 24.0 * mu_max / (1.0 - alpha_bt) * (
                mu_0 * dist0_sq / (n * (n + 1) * (2 * n + 1)) + curv / ((n + 1) * (2 * n + 1)))

        _record_bounds(monitor, hist, "accelerated_backtracking", F_star, grad_bound,
                       (lambda n: accelerated_value_bound(n, mu_max, dist0_sq)) if r == 0.0 else None)
    trace = monitor.finish(hist.states[-1].x)
    trace.summary["mu_tilde_max"] = mu_max
    return trace
