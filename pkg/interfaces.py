"""
Abstract Interfaces Module
Defines abstract base classes for the oracles and inner solvers plugged into the solvers
"""

from abc import ABC, abstractmethod
from typing import Optional, Tuple, Any

import numpy as np


class ProxFunction(ABC):
    """
    Abstract interface for a closed convex function known through its proximal map.

    Implementations: prox_toolbox (norms, indicators, envelopes, wrappers)
    Metadata: lipschitz L (None when not Lipschitz), strong_convexity alpha,
    gradient_lipschitz (None unless smooth), domain_diameter (None when unbounded),
    closed_form (False for embedded numerical proxes), elementwise (a sum of one
    scalar function over the entries, so value sums and prox/gradient act entrywise
    on vectors of any length), component_count (prox calls one application stands for).
    """

    lipschitz: Optional[float] = None
    strong_convexity: float = 0.0
    gradient_lipschitz: Optional[float] = None
    domain_diameter: Optional[float] = None
    closed_form: bool = True
    prox_tolerance: float = 0.0
    elementwise: bool = False
    component_count: int = 1

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """
        Evaluate the function.

        Args:
            x: Point

        Returns:
            float: Function value, np.inf outside the domain
        """
        pass

    @abstractmethod
    def prox(self, t: float, x: np.ndarray) -> np.ndarray:
        """
        Proximal map argmin_z value(z) + |z - x|^2 / (2t).

        Args:
            t: Step size, t > 0
            x: Point

        Returns:
            np.ndarray: The proximal point
        """
        pass

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient, available only when gradient_lipschitz is set"""
        raise NotImplementedError(f"{type(self).__name__} is not smooth")

    @property
    def is_smooth(self) -> bool:
        return self.gradient_lipschitz is not None


class SmoothMap(ABC):
    """
    Abstract interface for a C^1 map c: R^d -> R^m with a beta-Lipschitz Jacobian.

    Jacobian actions are user-supplied oracles; a dense jacobian() is optional.
    component_count is the number of component oracle calls one call stands for.
    """

    beta: float = 0.0
    opnorm_bound: float = np.inf
    dim: Optional[int] = None
    component_count: int = 1

    @abstractmethod
    def eval(self, x: np.ndarray) -> np.ndarray:
        """Evaluate c(x)"""
        pass

    @abstractmethod
    def jvp(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Jacobian-vector product grad c(x) v"""
        pass

    @abstractmethod
    def vjp(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Adjoint product grad c(x)^T w"""
        pass

    def jacobian(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Dense Jacobian when cheap to form, else None"""
        return None

    def opnorm_at(self, x: np.ndarray, n_steps: int = 50, tol: float = 1e-6) -> float:
        """
        Operator norm of grad c(x).

        Exact from the dense Jacobian when available, otherwise power iteration
        on grad c(x)^T grad c(x) inflated by the tolerance.
        """
        J = self.jacobian(x)
        if J is not None:
            return float(np.linalg.norm(J, 2))
        v = np.ones_like(np.asarray(x, dtype=float))
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(n_steps):
            u = self.vjp(x, self.jvp(x, v))
            nu = float(np.linalg.norm(u))
            if nu == 0.0:
                return 0.0
            new_sigma = np.sqrt(nu)
            v = u / nu
            if abs(new_sigma - sigma) <= tol * new_sigma:
                sigma = new_sigma
                break
            sigma = new_sigma
        return sigma * (1.0 + 10 * tol)


class SmoothFunction(ABC):
    """
    Abstract interface for a smooth convex function with an L_f-Lipschitz gradient.
    """

    lipschitz_gradient: float = 0.0

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        pass

    @abstractmethod
    def gradient(self, x: np.ndarray) -> np.ndarray:
        pass


class LinearlyConvergentSubscheme(ABC):
    """
    Abstract interface for an inner method with a linear rate on prox-linear subproblems.

    Guarantee: E[F_t(z_i; x) - min F_t(.; x)] <= gamma (1 - tau)^i |z_0 - z*|^2.
    """

    name: str = "subscheme"

    @abstractmethod
    def constants(self, model: Any) -> Tuple[float, float]:
        """
        Rate constants valid on a given subproblem.

        Args:
            model: LinearizedModel the scheme will be run on

        Returns:
            Tuple[float, float]: (gamma, tau)
        """
        pass

    @abstractmethod
    def run(self, model: Any, z0: np.ndarray, n_iters: int) -> np.ndarray:
        """
        Run exactly n_iters iterations warm-started at z0.

        Returns:
            np.ndarray: Final iterate
        """
        pass
