"""
Verify Module
Independent oracles and property checks: envelope gradients, the prox-gradient sandwich, weak convexity probes
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from core_engine import CompositeProblem, as_vector, finite_diff_jacobian_check, objective_value
from data_models import Trace
from errors import BudgetExhausted
from interfaces import ProxFunction
from performance_monitor import PerformanceMonitor
from prox_toolbox import QuadraticShift, envelope_gradient, envelope_value, prox_of_envelope
from subproblem import REFERENCE_REL_TOL, build_model, solve_exact, true_prox_grad_norm

logger = logging.getLogger(__name__)

SANDWICH_REL_SLACK = 1e-5
SANDWICH_ABS_SLACK = 1e-7


# ============================================================================
# ENVELOPE ORACLE
# ============================================================================

@dataclass
class EnvelopeOracle:
    """
    prox_{nu F} and the envelope gradient (x - prox_{nu F}(x)) / nu.

    Requires nu < 1/mu so the regularized problem F + |. - x|^2/(2 nu) is
    (1/nu - mu)-strongly convex and its minimizer unique.
    """
    problem: CompositeProblem
    nu: float
    tol: float = 1e-12
    max_steps: int = 10000

    def __post_init__(self):
        if self.nu <= 0 or (self.problem.mu > 0 and self.nu * self.problem.mu >= 1.0):
            raise ValueError(f"EnvelopeOracle: nu={self.nu} must lie in (0, 1/mu), mu={self.problem.mu}")

    @property
    def strong_convexity(self) -> float:
        return 1.0 / self.nu - self.problem.mu

    def prox_point(self, x: np.ndarray) -> np.ndarray:
        return composite_prox_point(self, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = as_vector(x)
        return (x - composite_prox_point(self, x)) / self.nu


def regularized_problem(problem: CompositeProblem, x: np.ndarray, nu: float) -> CompositeProblem:
    """F + |. - x|^2 / (2 nu), with the quadratic folded into g"""
    return replace(problem.fresh(), g=QuadraticShift(problem.g, x, 1.0 / nu), name=f"{problem.name}_moreau")


def composite_prox_point(oracle: EnvelopeOracle, x: np.ndarray) -> np.ndarray:
    """
    Minimize F(z) + |z - x|^2 / (2 nu) by exact prox-linear steps at t = 1/(mu + 1/nu).

    After a step z+ = S_t(z), dist(0; dF_reg(z+)) <= (1 + mu t)|G_t(z)|, so the
    gap of z+ is at most that squared over twice the strong convexity modulus.

    Each step keeps the best certified point when its solve exhausts the
    dual iteration cap.

    Raises:
        BudgetExhausted: when max_steps steps do not close the certificate
    """
    x = as_vector(x)
    reg = regularized_problem(oracle.problem, x, oracle.nu)
    mu = oracle.problem.mu
    t = 1.0 / (mu + 1.0 / oracle.nu)
    sigma = oracle.strong_convexity
    z = x.copy()
    for step in range(1, oracle.max_steps + 1):
        m = build_model(reg, z, t)
        z_next = solve_exact(m, tol=REFERENCE_REL_TOL * (1.0 + abs(m.center_value())), strict=False).x_plus
        dist = (1.0 + mu * t) * float(np.linalg.norm(z - z_next)) / t
        z = z_next
        if dist ** 2 / (2.0 * sigma) <= oracle.tol:
            logger.debug(f"composite_prox_point: certified after {step} steps, dist={dist:.3e}")
            return z
    raise BudgetExhausted(f"composite_prox_point: certificate still open after {oracle.max_steps} steps")


# ============================================================================
# SANDWICH AND NEAR-STATIONARITY
# ============================================================================

def sandwich_constants(t: float, mu: float) -> Tuple[float, float]:
    """(lower, upper) with lower |grad F_nu| <= |G_t| <= upper |grad F_nu| at nu = t/(1 + t mu)"""
    lower = 1.0 / ((1.0 + mu * t) * (1.0 + np.sqrt(mu * t)))
    upper = (1.0 + 2.0 * t * mu) / (1.0 + t * mu) * (np.sqrt(t * mu / (1.0 + t * mu)) + 1.0)
    return float(lower), float(upper)


def check_sandwich(problem: CompositeProblem, x: np.ndarray, t: float,
                   tol: float = 1e-12) -> Tuple[bool, bool, Dict[str, float]]:
    """
    Compare |G_t(x)| with the envelope gradient |grad F_{t/(1+t mu)}(x)|.

    Args:
        problem: Composite problem
        x: Point
        t: Step size, t > 0
        tol: Gap tolerance of the envelope oracle

    Returns:
        Tuple[bool, bool, Dict]: (lower inequality holds, upper inequality holds, values)
    """
    if t <= 0:
        raise ValueError("check_sandwich: t must be positive")
    x = as_vector(x)
    mu = problem.mu
    oracle = EnvelopeOracle(problem, t / (1.0 + t * mu), tol=tol)
    env = float(np.linalg.norm(oracle.gradient(x)))
    G = true_prox_grad_norm(problem, x, t)
    lower, upper = sandwich_constants(t, mu)
    slack = SANDWICH_REL_SLACK * max(env, G) + SANDWICH_ABS_SLACK
    values = {"envelope_grad": env, "prox_grad": G, "lower": lower, "upper": upper}
    return lower * env <= G + slack, G <= upper * env + slack, values


@dataclass
class StationarityCertificate:
    """x_hat = prox_{F/(2 mu)}(x) with the three quantities bounded by |G_{1/mu}(x)|"""
    x_hat: np.ndarray
    prox_grad: float
    dist: float
    value_drop: float
    subgradient: float
    slack: float = 1e-6

    @property
    def dist_bound(self) -> float:
        return 2.0 * self.prox_grad

    @property
    def subgradient_bound(self) -> float:
        return 4.0 * self.prox_grad

    def holds(self) -> bool:
        return (self.dist <= self.dist_bound + self.slack
                and self.value_drop >= -self.slack
                and self.subgradient <= self.subgradient_bound + self.slack)


def near_stationarity_certificate(problem: CompositeProblem, x: np.ndarray,
                                  tol: float = 1e-12) -> StationarityCertificate:
    """
    Certify that x is near a nearly stationary point.

    Builds x_hat = prox_{F/(2 mu)}(x); then |x_hat - x| <= (2/mu)|G|,
    F(x_hat) <= F(x), and 2 mu (x - x_hat) is a subgradient of F at x_hat
    of norm at most 4|G|, with G = G_{1/mu}(x).

    Returns:
        StationarityCertificate: dist is reported in units of 1/mu
    """
    mu = problem.mu
    if mu <= 0:
        raise ValueError("near_stationarity_certificate: needs mu > 0")
    x = as_vector(x)
    oracle = EnvelopeOracle(problem, 1.0 / (2.0 * mu), tol=tol)
    x_hat = composite_prox_point(oracle, x)
    G = true_prox_grad_norm(problem, x, 1.0 / mu)
    d = float(np.linalg.norm(x_hat - x))
    uncounted = problem.fresh()
    cert = StationarityCertificate(x_hat=x_hat, prox_grad=G, dist=mu * d,
                                   value_drop=objective_value(uncounted, x) - objective_value(uncounted, x_hat),
                                   subgradient=2.0 * mu * d)
    logger.debug(f"near_stationarity_certificate: |G|={G:.3e} |x_hat-x|={d:.3e} holds={cert.holds()}")
    return cert


# ============================================================================
# PROBES
# ============================================================================

def weak_convexity_probe(fn: Callable[[np.ndarray], float], rho: float, n_samples: int, dim: int,
                         center: Optional[np.ndarray] = None, radius: float = 1.0, seed: int = 0) -> float:
    """
    Largest sampled violation of the rho-weak-convexity secant inequality
    f(a x + (1-a) y) <= a f(x) + (1-a) f(y) + rho a (1-a) |x - y|^2.

    Points are uniform in the box center +/- radius. A nonpositive result
    is consistent with rho-weak convexity on the sample only.
    """
    if rho < 0:
        raise ValueError("weak_convexity_probe: rho must be nonnegative")
    rng = np.random.default_rng(seed)
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    worst = -np.inf
    for _ in range(n_samples):
        x = c + rng.uniform(-radius, radius, dim)
        y = c + rng.uniform(-radius, radius, dim)
        a = rng.uniform()
        fx, fy, fm = fn(x), fn(y), fn(a * x + (1.0 - a) * y)
        if not np.isfinite(fx + fy + fm):
            continue
        lhs = fm
        rhs = a * fx + (1.0 - a) * fy + rho * a * (1.0 - a) * float(np.sum((x - y) ** 2))
        worst = max(worst, lhs - rhs)
    return float(worst)


def quadratic_penalization_check(f: ProxFunction, x: np.ndarray, lam: float, eps_gap: float,
                                 alpha: float = 0.0, slack: float = 1e-12) -> bool:
    """
    |(x - prox_{lam f}(x)) / lam| <= sqrt(2 eps / lam), and <= sqrt(eps / (lam (1 + lam alpha / 2)))
    when f is alpha-strongly convex, for any x with f(x) - inf f <= eps.
    """
    if lam <= 0 or eps_gap < 0:
        raise ValueError("quadratic_penalization_check: need lam > 0 and eps_gap >= 0")
    x = np.asarray(x, dtype=float)
    step = float(np.linalg.norm(x - f.prox(lam, x))) / lam
    ok = step <= np.sqrt(2.0 * eps_gap / lam) + slack
    if alpha > 0:
        ok = ok and step <= np.sqrt(eps_gap / (lam * (1.0 + 0.5 * lam * alpha))) + slack
    return bool(ok)


def probe_constants(problem: CompositeProblem, n_samples: int = 10000, radius: float = 1.0,
                    center: Optional[np.ndarray] = None, seed: int = 0) -> Dict[str, float]:
    """
    Sampled difference quotients for L, beta and |grad c|.

    Samples are projected onto dom g when g is an indicator with a bounded domain.

    Returns:
        Dict: observed maxima "L", "beta", "jac" next to the declared values
    """
    rng = np.random.default_rng(seed)
    c, h = problem.c, problem.h
    dim = c.dim or (center.shape[0] if center is not None else 1)
    base = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    seen = {"L": 0.0, "beta": 0.0, "jac": 0.0}
    for _ in range(n_samples):
        x = base + rng.uniform(-radius, radius, dim)
        y = base + rng.uniform(-radius, radius, dim)
        if problem.g.domain_diameter is not None:
            x, y = problem.g.prox(1.0, x), problem.g.prox(1.0, y)
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        cx, cy = np.atleast_1d(c.eval(x)), np.atleast_1d(c.eval(y))
        if np.linalg.norm(cx - cy) > 1e-12 and np.isfinite(h.value(cx)) and np.isfinite(h.value(cy)):
            seen["L"] = max(seen["L"], abs(h.value(cx) - h.value(cy)) / float(np.linalg.norm(cx - cy)))
        jx, jy = np.atleast_1d(c.jvp(x, v)), np.atleast_1d(c.jvp(y, v))
        dxy = float(np.linalg.norm(x - y))
        if dxy > 1e-12:
            seen["beta"] = max(seen["beta"], float(np.linalg.norm(jx - jy)) / dxy)
        seen["jac"] = max(seen["jac"], float(np.linalg.norm(jx)))
    return {**seen, "declared_L": problem.L, "declared_beta": problem.beta, "declared_jac": problem.jac_bound}


# ============================================================================
# PROX CALCULUS
# ============================================================================

def envelope_sandwich_gap(f: ProxFunction, nu: float, x: np.ndarray) -> float:
    """
    Worst violation of f_nu(x) <= f(x) <= f_nu(x) + L^2 nu / 2; nonpositive when it holds.
    """
    fx, env = f.value(x), envelope_value(f, nu, x)
    L = f.lipschitz if f.lipschitz is not None else np.inf
    return float(max(env - fx, fx - env - 0.5 * L ** 2 * nu))


def envelope_gradient_fd_error(f: ProxFunction, nu: float, x: np.ndarray, step: float = 1e-6) -> float:
    """Relative error of the envelope gradient against central differences"""
    x = np.asarray(x, dtype=float)
    grad = envelope_gradient(f, nu, x)
    fd = np.array([(envelope_value(f, nu, x + step * e) - envelope_value(f, nu, x - step * e)) / (2 * step)
                   for e in np.eye(x.shape[0])])
    return float(np.linalg.norm(fd - grad) / max(1.0, np.linalg.norm(grad)))


def prox_of_envelope_error(f: ProxFunction, nu: float, t: float, x: np.ndarray) -> float:
    """Distance between the closed-form prox of f_nu and a direct numerical minimization"""
    x = np.asarray(x, dtype=float)
    closed = prox_of_envelope(f, nu, t, x)

    def objective(z):
        d = z - x
        return envelope_value(f, nu, z) + float(np.dot(d, d)) / (2.0 * t)

    def gradient(z):
        return envelope_gradient(f, nu, z) + (z - x) / t

    res = minimize(objective, closed + 0.1, jac=gradient, method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return float(np.linalg.norm(res.x - closed))


# ============================================================================
# SUITE
# ============================================================================

def verification_suite(problem: CompositeProblem, points: Iterable[np.ndarray],
                       t_factors: Sequence[float] = (1.0, 0.5), rho: Optional[float] = None,
                       n_probe: int = 1000, probe_radius: float = 1.0, seed: int = 0,
                       sandwich: bool = True, probes: bool = True, prox_calculus: bool = True,
                       fd_dirs: int = 5) -> Trace:
    """
    The checks run by the verify command on one instance.

    Records one GuaranteeCheck per inequality: the sandwich at t = f / mu for
    each factor f and point, oracle finite differences, the declared constants
    against sampled quotients, the secant inequality of F with rho (mu by
    default), and the envelope identities of h at the points c(x).
    """
    monitor = PerformanceMonitor("verify", problem.fresh().counters)
    mu = problem.mu
    points = [as_vector(p) for p in points]
    ref = problem.fresh()
    for i, x in enumerate(points):
        if sandwich and mu > 0:
            for f in t_factors:
                lower_ok, upper_ok, vals = check_sandwich(problem, x, f / mu)
                env, G = vals["envelope_grad"], vals["prox_grad"]
                slack = SANDWICH_REL_SLACK * max(env, G) + SANDWICH_ABS_SLACK
                monitor.record_check(f"sandwich_lower_t{f:g}", i, vals["lower"] * env, G, slack=slack)
                monitor.record_check(f"sandwich_upper_t{f:g}", i, G, vals["upper"] * env, slack=slack)
        if probes:
            monitor.record_check("oracle_finite_difference", i,
                                 finite_diff_jacobian_check(problem.c, x, fd_dirs, seed=seed + i), 1e-5)
        if prox_calculus:
            z = np.atleast_1d(ref.c.eval(x))
            nu = 0.1
            monitor.record_check("envelope_sandwich", i, envelope_sandwich_gap(problem.h, nu, z), 0.0, slack=1e-12)
            monitor.record_check("envelope_gradient_fd", i, envelope_gradient_fd_error(problem.h, nu, z), 1e-5)
            monitor.record_check("prox_of_envelope", i, prox_of_envelope_error(problem.h, nu, 0.5, z), 1e-6)
    if probes:
        center = points[0] if points else None
        seen = probe_constants(problem, n_probe, radius=probe_radius, center=center, seed=seed)
        for key, declared in (("L", "declared_L"), ("beta", "declared_beta"), ("jac", "declared_jac")):
            monitor.record_check(f"declared_{key}", 0, seen[key], seen[declared],
                                 slack=1e-9 * (1.0 + seen[declared]))
        dim = center.shape[0] if center is not None else (problem.c.dim or 1)
        violation = weak_convexity_probe(lambda z: objective_value(ref, z), mu if rho is None else rho, n_probe,
                                         dim=dim, center=center, radius=probe_radius, seed=seed)
        monitor.record_check("weak_convexity", 0, violation, 0.0, slack=1e-9)
    trace = monitor.finish(None)
    logger.info(f"Verify: {problem.name} {len(trace.checks)} checks, {len(trace.failed_checks())} failed")
    return trace
