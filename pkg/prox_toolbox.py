"""
Prox Toolbox
Proximal operators, Moreau envelopes and conjugate proxes through the Moreau identity
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from errors import NonConvexBase
from interfaces import ProxFunction

logger = logging.getLogger(__name__)

_FEAS_TOL = 1e-12


# ============================================================================
# STANDARD PROX LIBRARY
# ============================================================================

class ZeroFunction(ProxFunction):
    """f = 0"""

    lipschitz = 0.0
    gradient_lipschitz = 0.0
    elementwise = True

    def value(self, x):
        return 0.0

    def prox(self, t, x):
        return np.array(x, dtype=float)

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class LinearFunction(ProxFunction):
    """f(z) = <a, z>; with a = [1] this is the identity on R"""

    gradient_lipschitz = 0.0

    def __init__(self, a):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.lipschitz = float(np.linalg.norm(self.a))

    def value(self, x):
        return float(np.dot(self.a, x))

    def prox(self, t, x):
        return np.asarray(x, dtype=float) - t * self.a

    def gradient(self, x):
        return self.a.copy()


class L1Norm(ProxFunction):
    """f = scale * |x|_1 on R^dim; soft thresholding"""

    elementwise = True

    def __init__(self, dim: int = 1, scale: float = 1.0):
        self.dim = dim
        self.scale = scale
        self.lipschitz = scale * np.sqrt(dim)

    def value(self, x):
        return self.scale * float(np.sum(np.abs(x)))

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * np.maximum(np.abs(x) - t * self.scale, 0.0)


class L2Norm(ProxFunction):
    """f = scale * |x|_2; block soft thresholding"""

    def __init__(self, scale: float = 1.0):
        self.scale = scale
        self.lipschitz = scale

    def value(self, x):
        return self.scale * float(np.linalg.norm(x))

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        thresh = t * self.scale
        if nx <= thresh:
            return np.zeros_like(x)
        return (1.0 - thresh / nx) * x


class SquaredL2(ProxFunction):
    """f = (scale/2) |x|^2"""

    elementwise = True

    def __init__(self, scale: float = 1.0):
        self.scale = scale
        self.strong_convexity = scale
        self.gradient_lipschitz = scale

    def value(self, x):
        return 0.5 * self.scale * float(np.dot(x, x))

    def prox(self, t, x):
        return np.asarray(x, dtype=float) / (1.0 + t * self.scale)

    def gradient(self, x):
        return self.scale * np.asarray(x, dtype=float)


class BoxIndicator(ProxFunction):
    """Indicator of {lo <= x <= hi}"""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise ValueError("BoxIndicator: lo must not exceed hi")
        self.domain_diameter = float(np.linalg.norm(self.hi - self.lo))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if np.all(x >= self.lo - _FEAS_TOL) and np.all(x <= self.hi + _FEAS_TOL):
            return 0.0
        return np.inf

    def prox(self, t, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)


class NonnegIndicator(ProxFunction):
    """Indicator of the nonnegative orthant"""

    def value(self, x):
        return 0.0 if np.all(np.asarray(x) >= -_FEAS_TOL) else np.inf

    def prox(self, t, x):
        return np.maximum(np.asarray(x, dtype=float), 0.0)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-based)"""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class MaxCoordinate(ProxFunction):
    """f(x) = max_i x_i, the support function of the simplex"""

    lipschitz = 1.0

    def value(self, x):
        return float(np.max(x))

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        return x - t * project_simplex(x / t)


class DistanceToOrthant(ProxFunction):
    """f(y) = scale * dist(y, R^m_+) = scale * |min(y, 0)|"""

    def __init__(self, scale: float = 1.0):
        self.scale = scale
        self.lipschitz = scale

    def value(self, x):
        return self.scale * float(np.linalg.norm(np.minimum(x, 0.0)))

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        proj = np.maximum(x, 0.0)
        d = np.linalg.norm(x - proj)
        if d <= t * self.scale:
            return proj
        return x + (t * self.scale / d) * (proj - x)


class ScalarNumericalProx(ProxFunction):
    """
    Convex function on R given by a callable; prox by bounded Brent search.

    The prox point lies within t*L of x, which brackets the search.
    Tolerance 1e-12 * (1 + |x|).
    """

    closed_form = False

    def __init__(self, fn: Callable[[float], float], lipschitz: float):
        self.fn = fn
        self.lipschitz = lipschitz

    def value(self, x):
        return float(self.fn(float(np.atleast_1d(x)[0])))

    def prox(self, t, x):
        x0 = float(np.atleast_1d(x)[0])
        self.prox_tolerance = 1e-12 * (1.0 + abs(x0))
        radius = t * self.lipschitz + 1e-9
        res = minimize_scalar(lambda z: self.fn(z) + (z - x0) ** 2 / (2 * t),
                              bounds=(x0 - radius, x0 + radius), method="bounded",
                              options={"xatol": self.prox_tolerance})
        return np.array([res.x])


# ============================================================================
# WRAPPERS
# ============================================================================

class ScaledFunction(ProxFunction):
    """s * f for s > 0"""

    def __init__(self, base: ProxFunction, s: float):
        if s <= 0:
            raise ValueError("ScaledFunction: scale must be positive")
        self.base = base
        self.s = s
        self.lipschitz = None if base.lipschitz is None else s * base.lipschitz
        self.gradient_lipschitz = None if base.gradient_lipschitz is None else s * base.gradient_lipschitz
        self.strong_convexity = s * base.strong_convexity
        self.closed_form = base.closed_form
        self.elementwise = base.elementwise

    def value(self, x):
        return self.s * self.base.value(x)

    def prox(self, t, x):
        return self.base.prox(self.s * t, x)

    def gradient(self, x):
        return self.s * self.base.gradient(x)


class QuadraticShift(ProxFunction):
    """base(z) + (weight/2) |z - center|^2"""

    def __init__(self, base: ProxFunction, center: np.ndarray, weight: float):
        self.base = base
        self.center = np.asarray(center, dtype=float)
        self.weight = weight
        self.strong_convexity = base.strong_convexity + weight
        self.closed_form = base.closed_form

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return self.base.value(x) + 0.5 * self.weight * float(np.dot(d, d))

    def prox(self, t, x):
        tw = t * self.weight
        merged = (np.asarray(x, dtype=float) + tw * self.center) / (1.0 + tw)
        return self.base.prox(t / (1.0 + tw), merged)


class SeparableSum(ProxFunction):
    """
    weight * sum_i f_i(z_i) over scalar components; prox is coordinatewise.

    When every component is one shared elementwise function the whole vector
    goes through it in a single call.
    """

    def __init__(self, components: Sequence[ProxFunction], weight: float = 1.0):
        self.components: List[ProxFunction] = list(components)
        self.weight = weight
        lips = [f.lipschitz for f in self.components]
        self.lipschitz = None if any(l is None for l in lips) else weight * float(np.sqrt(np.sum(np.square(lips))))
        gls = [f.gradient_lipschitz for f in self.components]
        self.gradient_lipschitz = None if any(g is None for g in gls) else weight * float(max(gls))
        self.closed_form = all(f.closed_form for f in self.components)
        first = self.components[0] if self.components else None
        self.shared = first if first is not None and first.elementwise and all(
            f is first for f in self.components) else None

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.shared is not None:
            return self.weight * float(self.shared.value(x))
        return self.weight * float(sum(f.value(x[i:i + 1]) for i, f in enumerate(self.components)))

    def prox(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.shared is not None:
            return self.shared.prox(self.weight * t, x)
        return np.concatenate([f.prox(self.weight * t, x[i:i + 1]) for i, f in enumerate(self.components)])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.shared is not None:
            return self.weight * self.shared.gradient(x)
        return self.weight * np.concatenate([f.gradient(x[i:i + 1]) for i, f in enumerate(self.components)])


# ============================================================================
# MOREAU ENVELOPES
# ============================================================================

def _check_prox_function(f, where: str) -> None:
    if not isinstance(f, ProxFunction):
        raise NonConvexBase(f"{where}: {type(f).__name__} does not provide a proximal map")


def envelope_value(f: ProxFunction, nu: float, x: np.ndarray) -> float:
    """
    Moreau envelope f_nu(x) = min_z f(z) + |z - x|^2 / (2 nu).

    Args:
        f: Convex function with a prox
        nu: Smoothing parameter, nu > 0
        x: Point

    Returns:
        float: Envelope value, computed at p = prox_{nu f}(x)
    """
    _check_prox_function(f, "envelope_value")
    if nu <= 0:
        raise ValueError("envelope_value: nu must be positive")
    x = np.asarray(x, dtype=float)
    p = f.prox(nu, x)
    fp = f.value(p)
    if not np.isfinite(fp):
        raise NonConvexBase("envelope_value: prox returned a point outside dom f")
    d = p - x
    return float(fp + np.dot(d, d) / (2.0 * nu))


def envelope_gradient(f: ProxFunction, nu: float, x: np.ndarray) -> np.ndarray:
    """Gradient (x - prox_{nu f}(x)) / nu of the envelope"""
    _check_prox_function(f, "envelope_gradient")
    if nu <= 0:
        raise ValueError("envelope_gradient: nu must be positive")
    x = np.asarray(x, dtype=float)
    return (x - f.prox(nu, x)) / nu


def prox_of_envelope(h: ProxFunction, nu: float, t: float, x: np.ndarray) -> np.ndarray:
    """prox_{t h_nu}(x) = (nu x + t prox_{(t+nu) h}(x)) / (t + nu)"""
    if nu <= 0 or t <= 0:
        raise ValueError("prox_of_envelope: nu and t must be positive")
    x = np.asarray(x, dtype=float)
    return (nu / (t + nu)) * x + (t / (t + nu)) * h.prox(t + nu, x)


class MoreauEnvelope(ProxFunction):
    """
    The envelope f_nu of a convex base function as a ProxFunction.

    Keeps the base Lipschitz constant; the gradient is 1/nu-Lipschitz.
    """

    def __init__(self, base: ProxFunction, nu: float):
        _check_prox_function(base, "MoreauEnvelope")
        if nu <= 0:
            raise ValueError("MoreauEnvelope: nu must be positive")
        self.base = base
        self.nu = nu
        self.lipschitz = base.lipschitz
        self.gradient_lipschitz = 1.0 / nu
        self.closed_form = base.closed_form
        self.elementwise = base.elementwise

    def value(self, x):
        return envelope_value(self.base, self.nu, x)

    def prox(self, t, x):
        return prox_of_envelope(self.base, self.nu, t, x)

    def gradient(self, x):
        return envelope_gradient(self.base, self.nu, x)


def huber(kappa: float, dim: int = 1) -> MoreauEnvelope:
    """Separable Huber sum: x^2/(2 kappa) near zero, |x| - kappa/2 in the tails"""
    return MoreauEnvelope(L1Norm(dim), kappa)


# ============================================================================
# CONJUGATES THROUGH THE MOREAU IDENTITY
# ============================================================================

def prox_conjugate_pair(h: ProxFunction, t: float, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    prox_{t h*}(w) together with the primal point u = prox_{h/t}(w/t).

    The returned pair satisfies w_plus in dh(u), so h*(w_plus) = <w_plus, u> - h(u).
    """
    if t <= 0:
        raise ValueError("prox_conjugate: t must be positive")
    w = np.asarray(w, dtype=float)
    u = h.prox(1.0 / t, w / t)
    return t * (w / t - u), u


def prox_conjugate(h: ProxFunction, t: float, w: np.ndarray) -> np.ndarray:
    """prox_{t h*}(w) = t (w/t - prox_{h/t}(w/t))"""
    return prox_conjugate_pair(h, t, w)[0]


def conjugate_value_at_pair(h: ProxFunction, w: np.ndarray, u: np.ndarray) -> float:
    """Exact h*(w) when w is a subgradient of h at u (Fenchel-Young equality)"""
    return float(np.dot(w, u) - h.value(u))


def conjugate_value(h: ProxFunction, w: np.ndarray, s: float = 1e-10) -> float:
    """
    h*(w) for an arbitrary w, np.inf outside the Lipschitz ball.

    Uses u = argmin h(u) - <w, u> + (s/2)|u|^2, read off prox_{h/s}(w/s);
    the result is a lower estimate within (s/2)|u|^2.
    """
    w = np.asarray(w, dtype=float)
    if h.lipschitz is not None and np.linalg.norm(w) > h.lipschitz * (1.0 + 1e-9) + 1e-12:
        return np.inf
    u = h.prox(1.0 / s, w / s)
    return conjugate_value_at_pair(h, w, u)


class ConjugateView(ProxFunction):
    """
    h* seen as a ProxFunction; prox and value route through h.

    dom h* lies in the L-ball; h* is (1/L_h)-strongly convex when h is L_h-smooth.
    """

    def __init__(self, base: ProxFunction):
        self.base = base
        if base.lipschitz is not None:
            self.domain_diameter = 2.0 * base.lipschitz
        gl = base.gradient_lipschitz
        self.strong_convexity = 1.0 / gl if gl is not None and gl > 0 else 0.0
        self.closed_form = base.closed_form

    def value(self, w):
        return conjugate_value(self.base, w)

    def prox(self, t, w):
        return prox_conjugate(self.base, t, w)
