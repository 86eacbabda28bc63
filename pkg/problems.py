"""
Problems Module
Instance zoo: additive composite, bound-constrained least squares, phase retrieval, exact penalty and LAD
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from scipy.optimize import linprog

from core_engine import CompositeProblem, as_vector, objective_value
from fast_gradient import AdditiveCompositeInstance, fgm_run_small_subgradient
from finite_sum import FiniteSumProblem, as_composite
from interfaces import ProxFunction, SmoothFunction, SmoothMap
from prox_toolbox import (BoxIndicator, DistanceToOrthant, L1Norm, L2Norm, LinearFunction, QuadraticShift,
                          ZeroFunction)

logger = logging.getLogger(__name__)


@dataclass
class ProblemInstance:
    """
    A generated problem with its parameters, start point and reference data.

    rho and r are the weak-convexity and convexity constants used by the
    accelerated bounds; None means unknown (the worst case mu applies).
    """
    name: str
    problem: Union[CompositeProblem, FiniteSumProblem]
    params: Dict[str, Any]
    seed: int
    x0: np.ndarray
    x_star: Optional[np.ndarray] = None
    f_inf: Optional[float] = None
    provenance: str = ""
    rho: Optional[float] = None
    r: Optional[float] = None
    M: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def composite(self) -> CompositeProblem:
        """The single composite view, aggregating finite sums"""
        if isinstance(self.problem, FiniteSumProblem):
            return as_composite(self.problem)
        return self.problem

    def to_config(self) -> Dict[str, Any]:
        """The instance block of a run config reproducing this instance"""
        return {"name": self.name, "seed": self.seed, "params": dict(self.params)}


# ============================================================================
# SMOOTH MAPS
# ============================================================================

class AffineMap(SmoothMap):
    """c(x) = A x - b"""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.dim = self.A.shape[1]
        self.beta = 0.0
        self.opnorm_bound = float(np.linalg.norm(self.A, 2))

    def eval(self, x):
        return self.A @ x - self.b

    def jvp(self, x, v):
        return self.A @ v

    def vjp(self, x, w):
        return self.A.T @ w

    def jacobian(self, x):
        return self.A


class QuadraticMap(SmoothMap):
    """
    c_i(x) = q_i^T x + x^T Q_i x / 2 + s_i for symmetric Q_i.

    beta = sqrt(sum |Q_i|^2) since the i-th Jacobian row changes by Q_i (x - y).
    """

    def __init__(self, q: np.ndarray, Q: np.ndarray, s: np.ndarray, radius: float = np.inf):
        self.q = np.atleast_2d(np.asarray(q, dtype=float))
        self.Q = np.asarray(Q, dtype=float)
        self.s = np.asarray(s, dtype=float)
        self.dim = self.q.shape[1]
        self.beta = float(np.sqrt(sum(np.linalg.norm(Qi, 2) ** 2 for Qi in self.Q)))
        self.opnorm_bound = float(np.linalg.norm(self.q, 2) + self.beta * radius)

    def eval(self, x):
        return self.q @ x + 0.5 * np.einsum("i,kij,j->k", x, self.Q, x) + self.s

    def jacobian(self, x):
        return self.q + np.einsum("kij,j->ki", self.Q, x)

    def jvp(self, x, v):
        return self.jacobian(x) @ v

    def vjp(self, x, w):
        return self.jacobian(x).T @ w


class SquaredProjectionMap(SmoothMap):
    """c_i(x) = <a_i, x>^2 - b_i for the rows a_i of A"""

    def __init__(self, A: np.ndarray, b: np.ndarray, beta: float, opnorm_bound: float = np.inf):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.dim = self.A.shape[1]
        self.beta = beta
        self.opnorm_bound = opnorm_bound

    def eval(self, x):
        return (self.A @ x) ** 2 - self.b

    def jvp(self, x, v):
        return 2.0 * (self.A @ x) * (self.A @ v)

    def vjp(self, x, w):
        return self.A.T @ (2.0 * (self.A @ x) * w)

    def jacobian(self, x):
        return 2.0 * (self.A @ x)[:, None] * self.A


class QuadraticObjectiveMap(SmoothMap):
    """The scalar map c(x) = x^T P x / 2 + p^T x; beta = |P|"""

    def __init__(self, P: np.ndarray, p: np.ndarray):
        self.P = np.asarray(P, dtype=float)
        self.p = np.asarray(p, dtype=float)
        self.dim = self.p.shape[0]
        self.beta = float(np.linalg.norm(self.P, 2))

    def eval(self, x):
        return np.array([0.5 * float(x @ self.P @ x) + float(self.p @ x)])

    def jvp(self, x, v):
        return np.array([float((self.P @ x + self.p) @ v)])

    def vjp(self, x, w):
        return (self.P @ x + self.p) * float(np.atleast_1d(w)[0])

    def jacobian(self, x):
        return (self.P @ x + self.p)[None, :]


class GreyBoxMap(SmoothMap):
    """
    Wraps a map whose values come from a simulation and counts every call.

    The counts are the simulation budget, separate from any solver counters.
    """

    def __init__(self, base: SmoothMap):
        self.base = base
        self.dim = base.dim
        self.beta = base.beta
        self.opnorm_bound = base.opnorm_bound
        self.simulations = {"eval": 0, "jvp": 0, "vjp": 0}

    def eval(self, x):
        self.simulations["eval"] += 1
        return self.base.eval(x)

    def jvp(self, x, v):
        self.simulations["jvp"] += 1
        return self.base.jvp(x, v)

    def vjp(self, x, w):
        self.simulations["vjp"] += 1
        return self.base.vjp(x, w)

    def jacobian(self, x):
        return self.base.jacobian(x)


class _Quadratic(SmoothFunction):
    """x^T P x / 2 + p^T x"""

    def __init__(self, P: np.ndarray, p: np.ndarray):
        self.P, self.p = P, p
        self.lipschitz_gradient = float(np.linalg.norm(P, 2))

    def value(self, x):
        return 0.5 * float(x @ self.P @ x) + float(self.p @ x)

    def gradient(self, x):
        return self.P @ x + self.p


class PenaltyFunction(ProxFunction):
    """h(u0, u) = u0 + lam * dist(u, R_+); the prox acts blockwise"""

    def __init__(self, lam: float):
        self.lam = lam
        self.dist = DistanceToOrthant(lam)
        self.lipschitz = float(np.sqrt(1.0 + lam ** 2))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x[0]) + self.dist.value(x[1:])

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([[x[0] - t], self.dist.prox(t, x[1:])])


# ============================================================================
# GENERATORS
# ============================================================================

def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def make_additive_composite(d: int = 20, seed: int = 0, lam: float = 0.1, cond: float = 10.0) -> ProblemInstance:
    """
    min q(x) + lam |x|_1 with q a convex quadratic, written as h = identity on R and c = q.

    L = 1 and beta = |P|, so mu = |P|. The reference comes from the fast
    gradient method with half the strong convexity of q moved onto the prox term.
    """
    rng = _rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eigs = np.linspace(1.0, cond, d)
    P = (U * eigs) @ U.T
    p = rng.standard_normal(d)
    sigma = float(eigs[0])

    problem = CompositeProblem(g=L1Norm(d, lam), h=LinearFunction([1.0]), c=QuadraticObjectiveMap(P, p),
                               name="additive_composite")
    inst = AdditiveCompositeInstance(f=_Quadratic(P - 0.5 * sigma * np.eye(d), p),
                                     p=QuadraticShift(L1Norm(d, lam), np.zeros(d), 0.5 * sigma))
    x_star, _ = fgm_run_small_subgradient(inst, np.zeros(d), 1e-10)
    ref = problem.fresh()
    return ProblemInstance(name="additive_composite", problem=problem,
                           params={"d": d, "lam": lam, "cond": cond}, seed=seed, x0=rng.standard_normal(d),
                           x_star=x_star, f_inf=objective_value(ref, x_star), provenance="fast gradient, residual 1e-10",
                           rho=0.0, r=0.0)


def make_nls_box(d: int = 5, m: int = 8, seed: int = 0, box: float = 1.0, curvature: float = 0.3,
                 zero_residual: bool = True) -> ProblemInstance:
    """
    min |c(x)|_2 subject to -box <= x <= box for a random quadratic map c.

    With zero_residual the constant terms are set so a planted point inside
    the box has c = 0, giving inf F = 0.
    """
    rng = _rng(seed)
    q = rng.standard_normal((m, d)) / np.sqrt(d)
    Q = rng.standard_normal((m, d, d)) * curvature / d
    Q = 0.5 * (Q + np.transpose(Q, (0, 2, 1)))
    planted = rng.uniform(-0.5 * box, 0.5 * box, d)
    s = np.zeros(m)
    base = QuadraticMap(q, Q, s)
    if zero_residual:
        s = -base.eval(planted)
    else:
        s = rng.standard_normal(m)
    radius = box * np.sqrt(d)
    c = QuadraticMap(q, Q, s, radius=radius)
    problem = CompositeProblem(g=BoxIndicator(-box * np.ones(d), box * np.ones(d)), h=L2Norm(), c=c,
                               name="nls_box", diameter_M=2.0 * radius)
    return ProblemInstance(name="nls_box", problem=problem,
                           params={"d": d, "m": m, "box": box, "curvature": curvature, "zero_residual": zero_residual},
                           seed=seed, x0=rng.uniform(-box, box, d),
                           x_star=planted if zero_residual else None, f_inf=0.0 if zero_residual else None,
                           provenance="planted zero residual" if zero_residual else "", M=2.0 * radius)


def phase_retrieval_from_data(A: np.ndarray, b: np.ndarray, radius: float = np.inf,
                              name: str = "phase_retrieval") -> CompositeProblem:
    """
    F(x) = (1/m) sum_i |<a_i, x>^2 - b_i| as h = |.|_1 / m and c_i = <a_i, x>^2 - b_i.

    L = 1/sqrt(m) and beta = 2 max|a_i| |A|, since grad c(x) - grad c(y) = 2 diag(A(x - y)) A.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    row_max = float(np.max(np.linalg.norm(A, axis=1)))
    beta = 2.0 * row_max * float(np.linalg.norm(A, 2))
    c = SquaredProjectionMap(A, b, beta=beta, opnorm_bound=2.0 * row_max * float(np.linalg.norm(A, 2)) * radius)
    return CompositeProblem(g=ZeroFunction(), h=L1Norm(m, 1.0 / m), c=c, name=name)


def phase_retrieval_finite_sum(A: np.ndarray, b: np.ndarray, radius: float = np.inf,
                               name: str = "phase_retrieval_fs") -> FiniteSumProblem:
    """The same objective as m components |c_i| with L = 1 and beta = 2 max |a_i|^2; all h_i share one |.|"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    row_max = float(np.max(np.linalg.norm(A, axis=1)))
    comps = [SquaredProjectionMap(A[i:i + 1], b[i:i + 1], beta=2.0 * row_max ** 2,
                                  opnorm_bound=2.0 * row_max ** 2 * radius) for i in range(A.shape[0])]
    h = L1Norm(1)
    return FiniteSumProblem(h_components=[h] * len(comps), c_components=comps, g=ZeroFunction(), name=name,
                            batched_c=SquaredProjectionMap(A, b, beta=2.0 * row_max ** 2))


def make_phase_retrieval(d: int = 5, m: int = 10, seed: int = 0, noise: float = 0.0,
                         finite_sum: bool = False, radius: float = 3.0) -> ProblemInstance:
    """
    Robust phase retrieval with Gaussian a_i and a planted unit signal.

    Noiseless measurements make the planted signal a global minimizer with F = 0.
    """
    rng = _rng(seed)
    A = rng.standard_normal((m, d))
    planted = rng.standard_normal(d)
    planted /= np.linalg.norm(planted)
    b = (A @ planted) ** 2 + noise * rng.standard_normal(m)
    problem = (phase_retrieval_finite_sum(A, b, radius) if finite_sum
               else phase_retrieval_from_data(A, b, radius))
    x0 = planted + 0.5 * rng.standard_normal(d) / np.sqrt(d)
    return ProblemInstance(name="phase_retrieval", problem=problem,
                           params={"d": d, "m": m, "noise": noise, "finite_sum": finite_sum, "radius": radius},
                           seed=seed, x0=x0,
                           x_star=planted if noise == 0.0 else None, f_inf=0.0 if noise == 0.0 else None,
                           provenance="planted signal" if noise == 0.0 else "", M=2.0 * radius,
                           extra={"A": A, "b": b, "planted": planted})


def make_abs_square(seed: int = 0, x0: float = 2.0) -> ProblemInstance:
    """f(x) = |x^2 - 1| on R, the one-dimensional phase retrieval instance with L = 1, beta = 2"""
    problem = phase_retrieval_from_data(np.array([[1.0]]), np.array([1.0]), name="abs_square")
    return ProblemInstance(name="abs_square", problem=problem, params={"x0": x0}, seed=seed,
                           x0=np.array([x0]), x_star=np.array([1.0]), f_inf=0.0, provenance="closed form")


def make_exact_penalty(d: int = 4, n_constraints: int = 3, seed: int = 0, lam: float = 5.0) -> ProblemInstance:
    """
    f(x) + lam dist(G(x), R_-) with f and G_i convex quadratics; c = (f, -G).

    G_i(x) = |x - z_i|^2 / 2 - r_i^2 / 2 with x = 0 strictly feasible.
    """
    rng = _rng(seed)
    P = np.eye(d) + 0.1 * np.diag(rng.uniform(size=d))
    p = 2.0 * rng.standard_normal(d)
    centers = 0.3 * rng.standard_normal((n_constraints, d))
    radii = np.linalg.norm(centers, axis=1) + rng.uniform(0.5, 1.0, n_constraints)
    q = np.vstack([p, centers])
    Q = np.concatenate([P[None], -np.repeat(np.eye(d)[None], n_constraints, axis=0)])
    s = np.concatenate([[0.0], 0.5 * radii ** 2 - 0.5 * np.sum(centers ** 2, axis=1)])
    c = QuadraticMap(q, Q, s, radius=float(np.max(radii + np.linalg.norm(centers, axis=1))))
    problem = CompositeProblem(g=ZeroFunction(), h=PenaltyFunction(lam), c=c, name="exact_penalty")
    return ProblemInstance(name="exact_penalty", problem=problem,
                           params={"d": d, "n_constraints": n_constraints, "lam": lam}, seed=seed,
                           x0=rng.standard_normal(d), extra={"centers": centers, "radii": radii})


def lad_reference(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin |Ax - b|_1 as the linear program min sum s subject to -s <= Ax - b <= s"""
    m, d = A.shape
    cost = np.concatenate([np.zeros(d), np.ones(m)])
    A_ub = np.block([[A, -np.eye(m)], [-A, -np.eye(m)]])
    b_ub = np.concatenate([b, -b])
    bounds = [(None, None)] * d + [(0, None)] * m
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"lad_reference: linprog failed: {res.message}")
    return res.x[:d]


def make_lad(d: int = 5, m: int = 20, seed: int = 0, noise: float = 0.5, outliers: float = 0.2) -> ProblemInstance:
    """
    Least absolute deviations |Ax - b|_1 with sparse gross errors.

    c is affine, so rho = r = 0 and mu = 0.
    """
    rng = _rng(seed)
    A = rng.standard_normal((m, d))
    planted = rng.standard_normal(d)
    b = A @ planted
    if noise > 0:
        mask = rng.uniform(size=m) < outliers
        b = b + noise * mask * rng.standard_normal(m)
    problem = CompositeProblem(g=ZeroFunction(), h=L1Norm(m), c=AffineMap(A, b), name="lad")
    x_star = lad_reference(A, b)
    ref = problem.fresh()
    return ProblemInstance(name="lad", problem=problem,
                           params={"d": d, "m": m, "noise": noise, "outliers": outliers}, seed=seed,
                           x0=np.zeros(d), x_star=x_star, f_inf=objective_value(ref, x_star),
                           provenance="linprog (HiGHS)", rho=0.0, r=0.0, extra={"A": A, "b": b})


PROBLEM_BUILDERS: Dict[str, Callable[..., ProblemInstance]] = {
    "additive_composite": make_additive_composite,
    "nls_box": make_nls_box,
    "phase_retrieval": make_phase_retrieval,
    "abs_square": make_abs_square,
    "exact_penalty": make_exact_penalty,
    "lad": make_lad,
}


def make_instance(name: str, seed: int = 0, **params: Any) -> ProblemInstance:
    """
    Build a zoo instance by name.

    Raises:
        KeyError: for an unknown instance name
    """
    if name not in PROBLEM_BUILDERS:
        raise KeyError(f"make_instance: unknown instance '{name}', choose from {sorted(PROBLEM_BUILDERS)}")
    instance = PROBLEM_BUILDERS[name](seed=seed, **params)
    instance.x0 = as_vector(instance.x0)
    logger.info(f"Problems: built '{name}' with seed {seed} and params {params}")
    return instance
