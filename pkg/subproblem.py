"""
Subproblem Module
The prox-linear subproblem F_t(.; y), its Fenchel dual, and certified inner solves
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from core_engine import CompositeProblem, objective_value
from data_models import CertificateKind, StoppingRule, SubproblemSolution
from errors import BudgetExhausted, DualBudgetExhausted, OutsideDualDomain, NonFiniteValue
from fast_gradient import (AdditiveCompositeInstance, fgm_run, fgm_run_small_subgradient)
from interfaces import ProxFunction, SmoothFunction
from prox_toolbox import (LinearFunction, QuadraticShift, ScaledFunction, conjugate_value,
                          conjugate_value_at_pair, prox_conjugate_pair)

logger = logging.getLogger(__name__)

EXACT_REL_TOL = 1e-12
REFERENCE_REL_TOL = 1e-13
DEFAULT_INNER_CAP = 200000
_ELL_FLOOR = 1e-300


@dataclass(frozen=True)
class LinearizedModel:
    """
    z -> g(z) + h(c(y) + shift + s grad c(y)(z - center)) + |z - center|^2 / (2t).

    The standard model F_t(.; y) has center = y, s = 1 and no shift. The
    two-center and perturbed models reuse the same structure.
    """
    problem: CompositeProblem
    y: np.ndarray
    center: np.ndarray
    c_y: np.ndarray
    t: float
    h: ProxFunction
    jac_norm: float
    jac_scale: float = 1.0
    shift: Optional[np.ndarray] = None

    @property
    def offset(self) -> np.ndarray:
        return self.c_y if self.shift is None else self.c_y + self.shift

    @property
    def ell(self) -> float:
        """Lipschitz constant t |A|^2 of the dual smooth part"""
        return self.t * (self.jac_scale * self.jac_norm) ** 2

    @property
    def smooth_lipschitz(self) -> Optional[float]:
        """Gradient Lipschitz constant of z -> h(inner(z)) when h is smooth"""
        if self.h.gradient_lipschitz is None:
            return None
        return (self.jac_scale * self.jac_norm) ** 2 * self.h.gradient_lipschitz

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.jac_scale * self.problem.jvp(self.y, v)

    def apply_adjoint(self, w: np.ndarray) -> np.ndarray:
        return self.jac_scale * self.problem.vjp(self.y, w)

    def inner(self, z: np.ndarray) -> np.ndarray:
        return self.offset + self.apply(z - self.center)

    def prox_h(self, s: float, z: np.ndarray) -> np.ndarray:
        self.problem.counters.n_prox_h += self.problem.h.component_count
        return self.h.prox(s, z)

    def center_value(self) -> float:
        """Model value at its center (F(y) for the standard model)"""
        return float(self.problem.g.value(self.center) + self.h.value(self.offset))

    def shifted(self, zeta: np.ndarray) -> "LinearizedModel":
        """The same model with zeta added inside h"""
        shift = zeta if self.shift is None else self.shift + zeta
        return replace(self, shift=np.asarray(shift, dtype=float))


def build_model(problem: CompositeProblem, y: np.ndarray, t: float,
                c_y: Optional[np.ndarray] = None) -> LinearizedModel:
    """
    Form F_t(.; y).

    Args:
        problem: Composite problem (its counters record the work)
        y: Linearization point
        t: Step size
        c_y: c(y) when already known

    Returns:
        LinearizedModel: The standard prox-linear model
    """
    y = np.asarray(y, dtype=float)
    if c_y is None:
        c_y = problem.c_eval(y)
    return LinearizedModel(problem=problem, y=y, center=y, c_y=c_y, t=t, h=problem.h,
                           jac_norm=problem.jac_norm_at(y))


def model_value(m: LinearizedModel, z: np.ndarray) -> float:
    """F_t(z; y) = g(z) + h(c(y) + grad c(y)(z - y)) + |z - y|^2 / (2t)"""
    g_val = m.problem.g.value(z)
    if g_val == np.inf:
        return np.inf
    d = np.asarray(z, dtype=float) - m.center
    val = g_val + m.h.value(m.inner(z)) + float(np.dot(d, d)) / (2.0 * m.t)
    if not np.isfinite(val):
        raise NonFiniteValue("model_value: non-finite model value")
    return float(val)


def _linear_coefficient(h: ProxFunction) -> Optional[np.ndarray]:
    if isinstance(h, LinearFunction):
        return h.a
    if isinstance(h, ScaledFunction):
        inner = _linear_coefficient(h.base)
        return None if inner is None else h.s * inner
    return None


# ============================================================================
# FENCHEL DUAL
# ============================================================================

@dataclass
class DualStep:
    """Outcome of one dual prox-gradient step w -> w_plus"""
    w_plus: np.ndarray
    x_bar: np.ndarray
    zeta: np.ndarray
    gap: float


class DualModel:
    """
    Negated Fenchel dual phi(w) = G*(A* w) - <b, w> + h*(w) of a LinearizedModel,
    with A = -s grad c(y), b = offset - A center and G = g + |. - center|^2 / (2t).
    """

    def __init__(self, model: LinearizedModel):
        self.model = model
        self.problem = model.problem

    @property
    def ell(self) -> float:
        return self.model.ell

    @property
    def step_ell(self) -> float:
        return max(self.model.ell, _ELL_FLOOR)

    @property
    def strong_convexity(self) -> float:
        gl = self.model.h.gradient_lipschitz
        return 1.0 / gl if gl is not None and gl > 0 else 0.0

    def primal_point(self, w: np.ndarray) -> np.ndarray:
        """grad G*(A* w) = prox_{tg}(center - t A^T w)"""
        m = self.model
        return self.problem.prox_g(m.t, m.center - m.t * m.apply_adjoint(w))

    def smooth_gradient_and_primal(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Gradient A x_bar - b = -(offset + A'(x_bar - center)) and x_bar"""
        x_bar = self.primal_point(w)
        return -self.model.inner(x_bar), x_bar

    def smooth_value(self, w: np.ndarray, x_bar: np.ndarray, grad: np.ndarray) -> float:
        d = x_bar - self.model.center
        return float(np.dot(w, grad) - self.problem.g.value(x_bar) - np.dot(d, d) / (2.0 * self.model.t))

    def conjugate_prox(self, s: float, w: np.ndarray) -> np.ndarray:
        self.problem.counters.n_prox_h += self.problem.h.component_count
        return prox_conjugate_pair(self.model.h, s, w)[0]

    def conjugate_prox_pair(self, s: float, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        self.problem.counters.n_prox_h += self.problem.h.component_count
        return prox_conjugate_pair(self.model.h, s, w)

    def initial_point(self) -> np.ndarray:
        return self.conjugate_prox(1.0, np.zeros_like(self.model.c_y))

    def dual_prox_step(self, w: np.ndarray) -> DualStep:
        """
        w_plus = prox_{h*/ell}(w - grad(w)/ell) with
        zeta = ell (w - w_plus) + grad(w_plus) - grad(w) in the subdifferential of phi at w_plus,
        and the Fenchel-Young duality gap of x_bar(w_plus).
        """
        ell = self.step_ell
        grad, _ = self.smooth_gradient_and_primal(w)
        w_plus, u = self.conjugate_prox_pair(1.0 / ell, w - grad / ell)
        grad_plus, x_bar = self.smooth_gradient_and_primal(w_plus)
        zeta = ell * (w - w_plus) + (grad_plus - grad)
        z_bar = -grad_plus
        h = self.model.h
        gap = h.value(z_bar) + conjugate_value_at_pair(h, w_plus, u) - float(np.dot(w_plus, z_bar))
        return DualStep(w_plus=w_plus, x_bar=x_bar, zeta=zeta, gap=max(float(gap), 0.0))

    def as_instance(self) -> AdditiveCompositeInstance:
        return AdditiveCompositeInstance(f=_DualSmoothPart(self), p=_DualConjugate(self))


class _DualSmoothPart(SmoothFunction):
    def __init__(self, dual: DualModel):
        self.dual = dual
        self.lipschitz_gradient = dual.step_ell

    def value(self, w):
        grad, x_bar = self.dual.smooth_gradient_and_primal(w)
        return self.dual.smooth_value(w, x_bar, grad)

    def gradient(self, w):
        return self.dual.smooth_gradient_and_primal(w)[0]


class _DualConjugate(ProxFunction):
    def __init__(self, dual: DualModel):
        self.dual = dual
        self.strong_convexity = dual.strong_convexity

    def value(self, w):
        return conjugate_value(self.dual.model.h, w)

    def prox(self, t, w):
        return self.dual.conjugate_prox(t, w)


def dual_objective_and_gradient(dm: DualModel, w: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Dual objective phi(w) and the gradient of its smooth part.

    Costs one vjp, one prox of g and one jvp.

    Raises:
        OutsideDualDomain: when h*(w) = +inf
    """
    w = np.asarray(w, dtype=float)
    grad, x_bar = dm.smooth_gradient_and_primal(w)
    h_conj = conjugate_value(dm.model.h, w)
    if h_conj == np.inf:
        raise OutsideDualDomain(f"dual_objective_and_gradient: |w| = {np.linalg.norm(w):.6g} outside dom h*")
    return dm.smooth_value(w, x_bar, grad) + h_conj, grad


def recover_primal(dm: DualModel, w: np.ndarray,
                   w_prev: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Primal point and dual subgradient zeta from a dual prox-gradient step.

    With w_prev, w must be the prox-gradient step taken from w_prev. Without it
    the step is taken from w and the pair refers to the resulting point.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (x_bar, zeta), x_bar the exact minimizer
        of the zeta-shifted subproblem
    """
    w = np.asarray(w, dtype=float)
    if w_prev is None:
        step = dm.dual_prox_step(w)
        return step.x_bar, step.zeta
    grad_prev, _ = dm.smooth_gradient_and_primal(w_prev)
    grad, x_bar = dm.smooth_gradient_and_primal(w)
    zeta = dm.step_ell * (w_prev - w) + (grad - grad_prev)
    return x_bar, zeta


# ============================================================================
# SOLVES
# ============================================================================

def _closed_form(m: LinearizedModel) -> Optional[np.ndarray]:
    coef = _linear_coefficient(m.h)
    if coef is not None:
        return m.problem.prox_g(m.t, m.center - m.t * m.apply_adjoint(coef))
    if m.ell == 0.0:
        return m.problem.prox_g(m.t, m.center)
    return None


def solve_to_gap(m: LinearizedModel, tol: float, w0: Optional[np.ndarray] = None,
                 cap: int = DEFAULT_INNER_CAP,
                 kind: CertificateKind = CertificateKind.FUNCTION_GAP,
                 strict: bool = True) -> SubproblemSolution:
    """
    Minimize F_t(.; y) to a certified functional gap.

    Closed form when h is linear (additive composite) or the Jacobian vanishes;
    otherwise restarted fast gradient on the dual with the Fenchel-Young gap
    of the recovered primal point as the stopping test.

    With strict=False an exhausted cap returns the best certified point;
    its gap is reported in SubproblemSolution.value.

    Raises:
        BudgetExhausted: when cap dual iterations do not certify tol (strict only)
    """
    if tol <= 0:
        raise ValueError("solve_to_gap: tol must be positive")
    x_plus = _closed_form(m)
    if x_plus is not None:
        return SubproblemSolution(x_plus=x_plus, kind=kind, value=0.0)

    dm = DualModel(m)
    inst = dm.as_instance()
    w = dm.initial_point() if w0 is None else np.asarray(w0, dtype=float)
    best = dm.dual_prox_step(w)
    iters = 1
    cycle = 20
    while best.gap > tol:
        if iters >= cap:
            if strict:
                raise BudgetExhausted(f"solve_to_gap: gap {best.gap:.3e} > {tol:.3e} after {iters} dual iterations")
            logger.debug(f"Subproblem: gap {best.gap:.3e} > {tol:.3e} after {iters} dual iterations, keeping best point")
            break
        w_cycle, _ = fgm_run(inst, best.w_plus, StoppingRule.fixed(cycle), track_values=False)
        step = dm.dual_prox_step(w_cycle)
        iters += cycle + 1
        if step.gap > 0.5 * best.gap:
            cycle = min(2 * cycle, 2000)
        if step.gap < best.gap:
            best = step
    return SubproblemSolution(x_plus=best.x_bar, kind=kind, value=best.gap,
                              zeta=None, dual=best.w_plus, inner_iters=iters)


def solve_exact(m: LinearizedModel, tol: Optional[float] = None, w0: Optional[np.ndarray] = None,
                cap: int = DEFAULT_INNER_CAP, strict: bool = True) -> SubproblemSolution:
    """
    Exact prox-linear step S_t(y): functional gap <= 1e-12 (1 + |F(y)|) by default.

    Args:
        m: Subproblem model
        tol: Gap tolerance override
        w0: Dual warm start
        cap: Dual iteration cap
        strict: Raise on an exhausted cap instead of returning the best certified point

    Returns:
        SubproblemSolution: Certificate kind EXACT with the achieved gap
    """
    if tol is None:
        tol = EXACT_REL_TOL * (1.0 + abs(m.center_value()))
    return solve_to_gap(m, tol, w0=w0, cap=cap, kind=CertificateKind.EXACT, strict=strict)


def dual_fgm_inner_count(t: float, jac_norm: float, L_h: float, L: float, eps: float) -> int:
    """1 + ceil(sqrt(t |grad c|^2 L_h / 2) log(8 t^2 |grad c|^4 L^2 / eps^2))"""
    return 1 + int(np.ceil(np.sqrt(t * jac_norm ** 2 * L_h / 2.0)
                           * np.log(8.0 * t ** 2 * jac_norm ** 4 * L ** 2 / eps ** 2)))


def solve_dual_stationary(m: LinearizedModel, eps: float, w0: Optional[np.ndarray] = None,
                          cap: int = DEFAULT_INNER_CAP) -> SubproblemSolution:
    """
    Fast gradient on the dual until the constructed zeta has |zeta| <= eps.

    Raises:
        DualBudgetExhausted: when cap iterations do not reach eps
    """
    x_plus = _closed_form(m)
    if x_plus is not None:
        return SubproblemSolution(x_plus=x_plus, kind=CertificateKind.DUAL_STATIONARY,
                                  value=0.0, zeta=np.zeros_like(m.c_y))
    dm = DualModel(m)
    inst = dm.as_instance()
    start = dm.initial_point() if w0 is None else np.asarray(w0, dtype=float)
    last = {}

    def capture(j, w, w_hat, res):
        last.update(j=j, w=w, w_hat=w_hat)

    try:
        w_hat, _ = fgm_run_small_subgradient(inst, start, eps, max_iters=cap, monitor=capture)
    except BudgetExhausted as e:
        raise DualBudgetExhausted(f"solve_dual_stationary: {str(e)}")
    x_bar, zeta = recover_primal(dm, w_hat, w_prev=last["w"])
    return SubproblemSolution(x_plus=x_bar, kind=CertificateKind.DUAL_STATIONARY,
                              value=float(np.linalg.norm(zeta)), zeta=zeta, dual=w_hat,
                              inner_iters=last["j"])


class _PrimalSmoothPart(SmoothFunction):
    def __init__(self, m: LinearizedModel):
        self.m = m
        self.lipschitz_gradient = max(m.smooth_lipschitz, _ELL_FLOOR)

    def value(self, z):
        return self.m.h.value(self.m.inner(z))

    def gradient(self, z):
        return self.m.apply_adjoint(self.m.h.gradient(self.m.inner(z)))


class _CountedG(ProxFunction):
    def __init__(self, m: LinearizedModel):
        self.m = m
        self.strong_convexity = m.problem.g.strong_convexity

    def value(self, z):
        return self.m.problem.g.value(z)

    def prox(self, t, z):
        return self.m.problem.prox_g(t, z)


def proximal_term(m: LinearizedModel) -> QuadraticShift:
    """p = g + |. - center|^2 / (2t) with counted proxes of g"""
    return QuadraticShift(_CountedG(m), m.center, 1.0 / m.t)


def primal_instance(m: LinearizedModel) -> AdditiveCompositeInstance:
    """F_t(.; y) as f + p with f = h(inner(.)) smooth and p = g + |. - center|^2/(2t)"""
    if m.smooth_lipschitz is None:
        raise ValueError("primal_instance: h must be smooth for primal fast gradient")
    return AdditiveCompositeInstance(f=_PrimalSmoothPart(m), p=proximal_term(m))


def solve_primal_fgm(m: LinearizedModel, eps_gap: float, z0: Optional[np.ndarray] = None,
                     cap: int = DEFAULT_INNER_CAP) -> SubproblemSolution:
    """
    Primal fast gradient with the extra prox-gradient step; a residual r
    certifies the gap t r^2 / 2 by (1/t)-strong convexity.
    """
    inst = primal_instance(m)
    start = m.center if z0 is None else z0
    iters = {"j": 0}

    def count(j, *_):
        iters["j"] = j

    x_hat, res = fgm_run_small_subgradient(inst, start, np.sqrt(2.0 * eps_gap / m.t),
                                           max_iters=cap, monitor=count)
    return SubproblemSolution(x_plus=x_hat, kind=CertificateKind.FUNCTION_GAP,
                              value=0.5 * m.t * res ** 2, inner_iters=iters["j"])


def prox_gradient(m: LinearizedModel, tol: Optional[float] = None) -> np.ndarray:
    """G_t(y) = (y - S_t(y)) / t"""
    sol = solve_exact(m, tol)
    return (m.center - sol.x_plus) / m.t


def reference_step(problem: CompositeProblem, x: np.ndarray, t: float,
                   rel_tol: float = REFERENCE_REL_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    High-accuracy S_t(x) and G_t(x) on an uncounted copy of the problem.

    A solve that exhausts its cap returns its best certified point.

    Returns:
        Tuple[np.ndarray, np.ndarray]: (S_t(x), G_t(x))
    """
    ref = problem.fresh()
    m = build_model(ref, x, t)
    sol = solve_exact(m, tol=rel_tol * (1.0 + abs(m.center_value())), strict=False)
    return sol.x_plus, (np.asarray(x, dtype=float) - sol.x_plus) / t


def true_prox_grad_norm(problem: CompositeProblem, x: np.ndarray, t: float,
                        rel_tol: float = REFERENCE_REL_TOL) -> float:
    """|G_t(x)| from a nested high-accuracy solve"""
    return float(np.linalg.norm(reference_step(problem, x, t, rel_tol)[1]))


def model_error_ok(problem: CompositeProblem, m: LinearizedModel, z: np.ndarray, slack: float = 1e-9) -> bool:
    """|F(z) - F(z; y)| <= (mu/2) |z - y|^2"""
    d = np.asarray(z, dtype=float) - m.y
    lin = model_value(m, z) - float(np.dot(d, d)) / (2.0 * m.t)
    return abs(objective_value(problem, z) - lin) <= 0.5 * problem.mu * float(np.dot(d, d)) + slack
