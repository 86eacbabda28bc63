"""
Data Models Module
Contains the data classes and enumerations shared by the solvers, the monitor and the CLI
"""

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import List, Dict, Any, Optional

import numpy as np


class CertificateKind(Enum):
    """How a subproblem solution certifies its accuracy"""
    EXACT = "exact"
    FUNCTION_GAP = "function_gap"
    DUAL_STATIONARY = "dual_stationary"


class InnerSolver(Enum):
    """Subsolver selection for the outer prox-linear loops"""
    CLOSED_FORM = "closed_form"
    EXACT = "exact"
    FGM_PRIMAL = "fgm_primal"
    FGM_DUAL = "fgm_dual"
    SUBSCHEME = "subscheme"
    OPTIMAL = "optimal"


class StopKind(Enum):
    """Stopping rule variants for the inner first-order methods"""
    FIXED_ITERS = "fixed_iters"
    TARGET_GAP = "target_gap"
    TARGET_RESIDUAL = "target_residual"


class ScheduleKind(Enum):
    """Error schedule families for eps_k / delta_k"""
    ZERO = "zero"
    POWER_LAW = "power_law"
    INVERSE_SQUARE = "inverse_square"
    CONSTANT = "constant"


class FiniteSumMode(Enum):
    """Finite-sum driver modes"""
    SMOOTH = "smooth"
    SMOOTHED = "smoothed"


@dataclass
class OracleCounters:
    """Basic-operation counts owned by a single solver run"""
    n_c_eval: int = 0
    n_jvp: int = 0
    n_vjp: int = 0
    n_prox_h: int = 0
    n_prox_g: int = 0
    n_grad_component: int = 0

    def copy(self) -> "OracleCounters":
        return OracleCounters(**asdict(self))

    def minus(self, other: "OracleCounters") -> "OracleCounters":
        """Increment since an earlier snapshot"""
        mine, theirs = asdict(self), asdict(other)
        return OracleCounters(**{k: mine[k] - theirs[k] for k in mine})

    def add(self, other: "OracleCounters") -> None:
        for k, v in asdict(other).items():
            setattr(self, k, getattr(self, k) + v)

    def basic_operations(self) -> int:
        """Total of the basic operations of the cost model, component gradients included"""
        return (self.n_c_eval + self.n_jvp + self.n_vjp + self.n_prox_h + self.n_prox_g
                + self.n_grad_component)

    def as_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass
class IterateRecord:
    """One outer iteration of a solver run"""
    k: int
    F_val: float
    prox_grad_norm: float
    step_norm: float = 0.0
    inner_iters: int = 0
    eps_k: float = 0.0
    delta_k: float = 0.0
    prox_grad_true: Optional[float] = None
    counters: OracleCounters = field(default_factory=OracleCounters)
    increment: OracleCounters = field(default_factory=OracleCounters)
    wall_ns: int = 0
    x: Optional[np.ndarray] = None
    extra: Dict[str, float] = field(default_factory=dict)


@dataclass
class GuaranteeCheck:
    """A guarantee inequality lhs <= rhs evaluated along a run"""
    name: str
    k: int
    lhs: float
    rhs: float
    slack: float = 0.0
    skipped: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.skipped or self.lhs <= self.rhs + self.slack


@dataclass
class Trace:
    """Everything a solver run reports"""
    solver: str
    records: List[IterateRecord] = field(default_factory=list)
    checks: List[GuaranteeCheck] = field(default_factory=list)
    x_out: Optional[np.ndarray] = None
    totals: OracleCounters = field(default_factory=OracleCounters)
    summary: Dict[str, Any] = field(default_factory=dict)

    def all_checks_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_checks(self) -> List[GuaranteeCheck]:
        return [c for c in self.checks if not c.passed]

    def checks_named(self, name: str) -> List[GuaranteeCheck]:
        return [c for c in self.checks if c.name == name]

    def F_values(self) -> np.ndarray:
        return np.array([r.F_val for r in self.records])

    def prox_grad_norms(self) -> np.ndarray:
        return np.array([r.prox_grad_norm for r in self.records])


@dataclass
class SubproblemSolution:
    """Approximate minimizer of a prox-linear subproblem with its certificate"""
    x_plus: np.ndarray
    kind: CertificateKind
    value: float = 0.0
    zeta: Optional[np.ndarray] = None
    dual: Optional[np.ndarray] = None
    inner_iters: int = 0

    def __post_init__(self):
        if self.value < 0:
            self.value = 0.0


@dataclass
class ErrorSchedule:
    """Inexactness budget eps_k for k >= 1, optionally capped from above"""
    kind: ScheduleKind = ScheduleKind.ZERO
    scale: float = 0.0
    q: float = 1.0
    cap: Optional[float] = None

    @classmethod
    def zero(cls) -> "ErrorSchedule":
        return cls(ScheduleKind.ZERO)

    @classmethod
    def power_law(cls, eps0: float, q: float) -> "ErrorSchedule":
        return cls(ScheduleKind.POWER_LAW, eps0, q)

    @classmethod
    def inverse_square(cls, scale: float) -> "ErrorSchedule":
        return cls(ScheduleKind.INVERSE_SQUARE, scale)

    @classmethod
    def constant(cls, value: float) -> "ErrorSchedule":
        return cls(ScheduleKind.CONSTANT, value)

    def eps(self, k: int) -> float:
        if k < 1:
            raise ValueError(f"ErrorSchedule: index must be >= 1, got {k}")
        if self.kind == ScheduleKind.ZERO:
            return 0.0
        if self.kind == ScheduleKind.POWER_LAW:
            value = self.scale / k ** (1.0 + self.q)
        elif self.kind == ScheduleKind.INVERSE_SQUARE:
            value = self.scale / k ** 2
        else:
            value = self.scale
        return value if self.cap is None else min(value, self.cap)

    def partial_sum(self, n: int) -> float:
        return sum(self.eps(k) for k in range(1, n + 1))


@dataclass
class StoppingRule:
    """Inner-loop stopping rule"""
    kind: StopKind = StopKind.FIXED_ITERS
    max_iters: int = 100
    target: float = 0.0
    f_star: Optional[float] = None

    @classmethod
    def fixed(cls, n: int) -> "StoppingRule":
        return cls(StopKind.FIXED_ITERS, max_iters=n)

    @classmethod
    def gap(cls, target: float, f_star: float, max_iters: int = 100000) -> "StoppingRule":
        return cls(StopKind.TARGET_GAP, max_iters=max_iters, target=target, f_star=f_star)

    @classmethod
    def residual(cls, target: float, max_iters: int = 100000) -> "StoppingRule":
        return cls(StopKind.TARGET_RESIDUAL, max_iters=max_iters, target=target)


@dataclass
class ProxLinearConfig:
    """Outer-loop settings shared by the prox-linear family"""
    t: Optional[float] = None
    schedule: ErrorSchedule = field(default_factory=ErrorSchedule)
    max_outer: int = 100
    inner: InnerSolver = InnerSolver.EXACT
    stop_tol: float = 0.0
    exact_rel_tol: float = 1e-12
    exact_cap: int = 20000
    inner_cap: int = 200000
    subscheme: Any = None
    check_guarantees: bool = True
    reference_grad: bool = False
    descent_slack: float = 1e-9


@dataclass
class SvrgConfig:
    """Prox-SVRG settings; eta and J default to 1/(10 ell) and ceil(100 kappa)"""
    eta: Optional[float] = None
    J: Optional[int] = None
    epochs: int = 1
    seed: int = 0
    step_factor: float = 0.1
    inner_factor: float = 100.0


@dataclass
class SmoothingPlan:
    """Target accuracy and the matching smoothing parameter"""
    eps_target: float
    t: float
    nu: float
    inner_eps_target: float


@dataclass
class BudgetPlan:
    """Fixed total inner budget split evenly across outer steps"""
    q: float
    T: int
    N: int
    per_step_inner: int


@dataclass
class AccelState:
    """State of the inertial prox-linear method at iteration k"""
    k: int
    a: float
    x: np.ndarray
    v: np.ndarray
    y: np.ndarray
    mu_tilde: float


@dataclass
class BacktrackState:
    """Step-size state carried across accelerated backtracking steps"""
    eta: float
    alpha: float
    t: float
    trials: int = 0

    @property
    def mu_tilde(self) -> float:
        return 1.0 / (self.alpha * self.t)
