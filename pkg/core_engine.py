"""
Core Engine
Composite problems F = g + h(c), counted oracle access, and oracle validation
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from data_models import OracleCounters
from errors import NonFiniteValue, DimensionMismatch
from interfaces import ProxFunction, SmoothMap

logger = logging.getLogger(__name__)


def as_vector(x, dim: Optional[int] = None) -> np.ndarray:
    """
    Coerce to a finite 1-d float64 array.

    Args:
        x: Array-like or scalar
        dim: Required dimension, if any

    Returns:
        np.ndarray: Contiguous copy
    """
    arr = np.atleast_1d(np.array(x, dtype=np.float64))
    if arr.ndim != 1:
        raise DimensionMismatch(f"as_vector: expected a 1-d array, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"as_vector: expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("as_vector: non-finite entry in vector")
    return arr


def check_finite(value, where: str):
    """Raise NonFiniteValue on NaN or inf anywhere in value"""
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"{where}: oracle returned a non-finite value")
    return value


@dataclass
class CompositeProblem:
    """
    The triple (g, h, c) defining F(x) = g(x) + h(c(x)).

    Every oracle call made through the problem is counted in `counters`, once
    per component when c or h stacks several.
    A run works on its own copy obtained from `fresh()`.
    """
    g: ProxFunction
    h: ProxFunction
    c: SmoothMap
    diameter_M: Optional[float] = None
    name: str = "composite"
    use_point_opnorm: bool = True
    counters: OracleCounters = field(default_factory=OracleCounters)

    def __post_init__(self):
        if self.h.lipschitz is None:
            raise ValueError("CompositeProblem: h must declare a Lipschitz constant")

    @property
    def L(self) -> float:
        return float(self.h.lipschitz)

    @property
    def beta(self) -> float:
        return float(self.c.beta)

    @property
    def mu(self) -> float:
        return self.L * self.beta

    @property
    def jac_bound(self) -> float:
        return float(self.c.opnorm_bound)

    def fresh(self) -> "CompositeProblem":
        """Copy sharing the oracles with zeroed counters"""
        return replace(self, counters=OracleCounters())

    # ========================================================================
    # COUNTED ORACLES
    # ========================================================================

    def c_eval(self, x: np.ndarray) -> np.ndarray:
        self.counters.n_c_eval += self.c.component_count
        return check_finite(np.atleast_1d(self.c.eval(x)), "c.eval")

    def jvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        self.counters.n_jvp += self.c.component_count
        return check_finite(np.atleast_1d(self.c.jvp(x, v)), "c.jvp")

    def vjp(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        self.counters.n_vjp += self.c.component_count
        return check_finite(np.atleast_1d(self.c.vjp(x, w)), "c.vjp")

    def prox_g(self, t: float, x: np.ndarray) -> np.ndarray:
        self.counters.n_prox_g += 1
        return check_finite(self.g.prox(t, x), "g.prox")

    def prox_h(self, t: float, z: np.ndarray) -> np.ndarray:
        self.counters.n_prox_h += self.h.component_count
        return check_finite(self.h.prox(t, z), "h.prox")

    def jac_norm_at(self, x: np.ndarray) -> float:
        """Operator-norm bound of grad c(x) used for dual Lipschitz constants"""
        if self.use_point_opnorm or not np.isfinite(self.jac_bound):
            return self.c.opnorm_at(x)
        return self.jac_bound


def objective_value(problem: CompositeProblem, x: np.ndarray) -> float:
    """
    Evaluate F(x) = g(x) + h(c(x)).

    Returns np.inf outside dom g without touching c.
    """
    g_val = problem.g.value(x)
    if np.isnan(g_val):
        raise NonFiniteValue("objective_value: g returned NaN")
    if g_val == np.inf:
        return np.inf
    h_val = problem.h.value(problem.c_eval(x))
    if not np.isfinite(h_val):
        raise NonFiniteValue("objective_value: h(c(x)) is not finite")
    return float(g_val + h_val)


def adjoint_mismatch(c: SmoothMap, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """Relative error of <jvp(x, v), w> = <v, vjp(x, w)>"""
    lhs = float(np.dot(np.atleast_1d(c.jvp(x, v)), w))
    rhs = float(np.dot(v, np.atleast_1d(c.vjp(x, w))))
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


def finite_diff_jacobian_check(c: SmoothMap, x: np.ndarray, n_dirs: int,
                               step: float = 1e-5, seed: int = 0) -> float:
    """
    Validate jvp/vjp oracles against central differences of eval.

    Args:
        c: Map to check
        x: Base point
        n_dirs: Number of random unit directions, >= 1
        step: Finite-difference step
        seed: Direction seed

    Returns:
        float: Worst relative error over the jvp and adjoint comparisons
    """
    if n_dirs < 1:
        raise ValueError("finite_diff_jacobian_check: n_dirs must be >= 1")
    x = as_vector(x)
    rng = np.random.default_rng(seed)
    m = np.atleast_1d(c.eval(x)).shape[0]
    worst = 0.0
    for _ in range(n_dirs):
        v = rng.standard_normal(x.shape[0])
        v /= np.linalg.norm(v)
        w = rng.standard_normal(m)
        fd = (np.atleast_1d(c.eval(x + step * v)) - np.atleast_1d(c.eval(x - step * v))) / (2 * step)
        jv = np.atleast_1d(c.jvp(x, v))
        err = np.linalg.norm(fd - jv) / max(1.0, np.linalg.norm(jv))
        worst = max(worst, float(err), adjoint_mismatch(c, x, v, w))
    logger.debug(f"finite_diff_jacobian_check: worst relative error {worst:.3e}")
    return worst
