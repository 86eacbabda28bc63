"""
Fast Gradient Module
Inner first-order solvers for strongly convex additive composite problems f + p
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Optional, Tuple

import numpy as np

from data_models import IterateRecord, StopKind, StoppingRule, Trace
from errors import BudgetExhausted
from interfaces import ProxFunction, SmoothFunction

logger = logging.getLogger(__name__)


@dataclass
class AdditiveCompositeInstance:
    """min f(x) + p(x) with f L_f-smooth and p alpha-strongly convex"""
    f: SmoothFunction
    p: ProxFunction

    def __post_init__(self):
        if not self.f.lipschitz_gradient > 0:
            raise ValueError("AdditiveCompositeInstance: L_f must be positive")

    @property
    def L_f(self) -> float:
        return float(self.f.lipschitz_gradient)

    @property
    def alpha(self) -> float:
        return float(self.p.strong_convexity)

    def value(self, x: np.ndarray) -> float:
        return self.f.value(x) + self.p.value(x)

    def prox_p(self, s: float, x: np.ndarray) -> np.ndarray:
        # a zero weight on p leaves only the quadratic in psi
        if s <= 0.0:
            return np.array(x, dtype=float)
        return self.p.prox(s, x)

    def prox_grad_step(self, x: np.ndarray, grad: Optional[np.ndarray] = None) -> np.ndarray:
        """prox_{p/L_f}(x - grad f(x)/L_f)"""
        if grad is None:
            grad = self.f.gradient(x)
        return self.prox_p(1.0 / self.L_f, x - grad / self.L_f)


@dataclass
class FgmState:
    """Estimate-sequence state; psi_j is (x0, s, theta) with argmin prox_{theta p}(x0 - s)"""
    j: int
    theta: float
    x0: np.ndarray
    s: np.ndarray
    x: np.ndarray
    y: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    a_next: float = 0.0


def fgm_weight(theta: float, alpha: float, L_f: float) -> float:
    """Positive root a of a^2 / (theta + a) = 2 (1 + alpha theta) / L_f"""
    c = 2.0 * (1.0 + alpha * theta) / L_f
    return 0.5 * (c + np.sqrt(c * c + 4.0 * c * theta))


def fgm_rate_bound(j: int, alpha: float, L_f: float, dist0_sq: float) -> float:
    """f^p(x_j) - f^p* <= (1 + sqrt(alpha/(2 L_f)))^(-2(j-1)) L_f/4 |x* - x0|^2"""
    return (1.0 + np.sqrt(alpha / (2.0 * L_f))) ** (-2.0 * (j - 1)) * 0.25 * L_f * dist0_sq


def fgm_iterations_for_gap(eps: float, alpha: float, L_f: float, dist0_sq: float) -> float:
    """Iterations after which the function gap is at most eps"""
    return 1.0 + np.sqrt(L_f / (2.0 * alpha)) * np.log(L_f * dist0_sq / (4.0 * eps))


def fgm_iterations_for_residual(eps: float, alpha: float, L_f: float, dist0_sq: float) -> float:
    """Iterations after which the extra prox-gradient step has dist(0, subdiff) <= eps"""
    return 1.0 + np.sqrt(L_f / (2.0 * alpha)) * np.log(2.0 * L_f ** 2 * dist0_sq / eps ** 2)


def fgm_start(inst: AdditiveCompositeInstance, x0: np.ndarray) -> FgmState:
    x0 = np.array(x0, dtype=float)
    return FgmState(j=0, theta=0.0, x0=x0, s=np.zeros_like(x0), x=x0.copy())


def fgm_step(inst: AdditiveCompositeInstance, state: FgmState) -> FgmState:
    """One iteration: two gradients of f, two proxes of p"""
    L_f, alpha = inst.L_f, inst.alpha
    a = fgm_weight(state.theta, alpha, L_f)
    theta_next = state.theta + a
    v = inst.prox_p(state.theta, state.x0 - state.s)
    y = (state.theta * state.x + a * v) / theta_next
    x_next = inst.prox_grad_step(y)
    s_next = state.s + a * inst.f.gradient(x_next)
    return FgmState(j=state.j + 1, theta=theta_next, x0=state.x0, s=s_next,
                    x=x_next, y=y, v=v, a_next=a)


def _small_step_residual(inst: AdditiveCompositeInstance, x: np.ndarray) -> Tuple[np.ndarray, float]:
    x_hat = inst.prox_grad_step(x)
    return x_hat, 2.0 * inst.L_f * float(np.linalg.norm(x - x_hat))


def fgm_run(inst: AdditiveCompositeInstance, x0: np.ndarray, stop: StoppingRule,
            monitor: Optional[Callable[[FgmState], Any]] = None,
            track_values: bool = True) -> Tuple[np.ndarray, Trace]:
    """
    Nesterov's fast gradient method.

    Args:
        inst: Additive composite instance
        x0: Starting point (also the center of psi_0)
        stop: Fixed count, target gap (needs f_star) or target residual
        monitor: Optional callback receiving each new state
        track_values: Record f^p(x_j) per iteration (extra oracle work)

    Returns:
        Tuple[np.ndarray, Trace]: Last iterate and per-iteration records
    """
    if stop.kind == StopKind.TARGET_GAP:
        track_values = True

    def value(x):
        return inst.value(x) if track_values else np.nan

    state = fgm_start(inst, x0)
    trace = Trace(solver="fgm")
    trace.records.append(IterateRecord(k=0, F_val=value(state.x), prox_grad_norm=0.0))
    if _stop_reached(inst, state, stop, trace):
        return state.x, trace
    for _ in range(stop.max_iters):
        state = fgm_step(inst, state)
        if monitor is not None:
            monitor(state)
        trace.records.append(IterateRecord(k=state.j, F_val=value(state.x), prox_grad_norm=0.0,
                                           extra={"theta": state.theta, "a": state.a_next}))
        if _stop_reached(inst, state, stop, trace):
            return state.x, trace
    if stop.kind == StopKind.FIXED_ITERS:
        return state.x, trace
    raise BudgetExhausted(f"fgm_run: target {stop.target:.3e} not reached in {stop.max_iters} iterations")


def _stop_reached(inst, state: FgmState, stop: StoppingRule, trace: Trace) -> bool:
    if stop.kind == StopKind.FIXED_ITERS:
        return state.j >= stop.max_iters
    if stop.kind == StopKind.TARGET_GAP:
        return trace.records[-1].F_val - stop.f_star <= stop.target
    _, res = _small_step_residual(inst, state.x)
    trace.records[-1].prox_grad_norm = res
    return res <= stop.target


def fgm_run_small_subgradient(inst: AdditiveCompositeInstance, x0: np.ndarray, eps: float,
                              max_iters: int = 100000,
                              monitor: Optional[Callable[[int, np.ndarray, np.ndarray, float], Any]] = None
                              ) -> Tuple[np.ndarray, float]:
    """
    Fast gradient method with an extra prox-gradient step per iteration.

    The point x_hat = prox_{p/L_f}(x_j - grad f(x_j)/L_f) admits the subgradient
    L_f (x_j - x_hat) + grad f(x_hat) - grad f(x_j) of norm at most 2 L_f |x_j - x_hat|.

    Args:
        inst: Instance with alpha > 0
        x0: Starting point
        eps: Target residual
        max_iters: Iteration cap
        monitor: Callback (j, x_j, x_hat_j, residual_bound)

    Returns:
        Tuple[np.ndarray, float]: (x_hat, residual_bound)
    """
    if eps <= 0:
        raise ValueError("fgm_run_small_subgradient: eps must be positive")
    state = fgm_start(inst, x0)
    while True:
        x_hat, res = _small_step_residual(inst, state.x)
        if monitor is not None:
            monitor(state.j, state.x, x_hat, res)
        if res <= eps:
            logger.debug(f"fgm_run_small_subgradient: residual {res:.3e} after {state.j} iterations")
            return x_hat, res
        if state.j >= max_iters:
            raise BudgetExhausted(f"fgm_run_small_subgradient: residual {res:.3e} > {eps:.3e} after {max_iters} iterations")
        state = fgm_step(inst, state)


def optimal_method_next_weight(a: float) -> float:
    """a_{j+1} = (sqrt(a^4 + 4 a^2) - a^2) / 2"""
    return 0.5 * (np.sqrt(a ** 4 + 4.0 * a ** 2) - a ** 2)


def optimal_method_bound(j: int, l: float, L: float) -> float:
    """Primal gap bound 8 l L^2 / (j + 2)^2 for the averaged iterate v_j"""
    return 8.0 * l * L ** 2 / (j + 2) ** 2


def optimal_method_run(dual: Any, budget_iters: int, l: Optional[float] = None,
                       w0: Optional[np.ndarray] = None,
                       monitor: Optional[Callable[[int, np.ndarray], Any]] = None
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Accelerated primal-dual method on the negated Fenchel dual of a subproblem.

    Args:
        dual: DualModel exposing smooth_gradient_and_primal, conjugate_prox, initial_point, ell
        budget_iters: Exact number of steps, >= 1
        l: Constant l >= t |A|^2 (defaults to dual.ell)
        w0: Starting dual point in dom h* (projected when omitted)
        monitor: Callback (j, v_j)

    Returns:
        Tuple[np.ndarray, np.ndarray]: (primal average v, dual iterate w)
    """
    if budget_iters < 1:
        raise ValueError("optimal_method_run: budget_iters must be >= 1")
    l = dual.ell if l is None else l
    if l <= 0:
        # zero Jacobian: the dual smooth part is affine
        l = 1.0
    w = dual.initial_point() if w0 is None else np.array(w0, dtype=float)
    z = w.copy()
    v = None
    a = 1.0
    for j in range(budget_iters):
        y = (1.0 - a) * w + a * z
        grad, x_bar = dual.smooth_gradient_and_primal(y)
        step = 1.0 / (a * l)
        z = dual.conjugate_prox(step, z - step * grad)
        w = (1.0 - a) * w + a * z
        v = x_bar.copy() if v is None else (1.0 - a) * v + a * x_bar
        if monitor is not None:
            monitor(j, v)
        a = optimal_method_next_weight(a)
    return v, w
