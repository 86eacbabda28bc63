"""
Finite Sum Module
Averages of m composite terms: aggregate view, Prox-SVRG subsolves and the coupled drivers
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core_engine import CompositeProblem, as_vector
from data_models import FiniteSumMode, OracleCounters, ProxLinearConfig, SvrgConfig, Trace
from errors import DimensionMismatch
from interfaces import LinearlyConvergentSubscheme, ProxFunction, SmoothMap
from prox_linear import plus_constants, run_coupled, wrap_plus
from prox_toolbox import MoreauEnvelope, SeparableSum
from subproblem import LinearizedModel, proximal_term, reference_step

logger = logging.getLogger(__name__)

SVRG_EPOCH_RATE = 0.9
_ELL_FLOOR = 1e-300


class StackedMap(SmoothMap):
    """
    c(x) = (c_1(x), ..., c_m(x)) for scalar-valued components.

    A batched map evaluating all components at once replaces the per-component
    loop when given; each call still stands for m component calls.
    """

    def __init__(self, components: Sequence[SmoothMap], beta: float, opnorm_bound: float = np.inf,
                 batched: Optional[SmoothMap] = None):
        self.components = list(components)
        dims = {getattr(c, "dim", None) for c in self.components} - {None}
        if len(dims) > 1:
            raise DimensionMismatch(f"StackedMap: components disagree on dimension {sorted(dims)}")
        self.dim = dims.pop() if dims else None
        self.beta = beta
        self.opnorm_bound = opnorm_bound
        self.batched = batched
        self.component_count = len(self.components)

    def eval(self, x):
        if self.batched is not None:
            return np.atleast_1d(self.batched.eval(x))
        return np.array([np.atleast_1d(c.eval(x))[0] for c in self.components])

    def jvp(self, x, v):
        if self.batched is not None:
            return np.atleast_1d(self.batched.jvp(x, v))
        return np.array([np.atleast_1d(c.jvp(x, v))[0] for c in self.components])

    def vjp(self, x, w):
        if self.batched is not None:
            return np.asarray(self.batched.vjp(x, w), dtype=float)
        return sum(wi * np.asarray(c.vjp(x, np.array([1.0])), dtype=float) for wi, c in zip(w, self.components))

    def jacobian(self, x):
        if self.batched is not None:
            return self.batched.jacobian(x)
        rows = [c.jacobian(x) for c in self.components]
        if any(r is None for r in rows):
            return None
        return np.vstack([np.atleast_2d(r) for r in rows])

    def rows(self, x) -> np.ndarray:
        """The m gradients grad c_i(x) as rows"""
        jac = self.jacobian(x)
        if jac is not None:
            return np.atleast_2d(np.asarray(jac, dtype=float))
        return np.vstack([np.asarray(c.vjp(x, np.array([1.0])), dtype=float) for c in self.components])


@dataclass
class FiniteSumProblem:
    """
    F(x) = (1/m) sum_i h_i(c_i(x)) + g(x) with scalar h_i and c_i.

    Constants are per component: L bounds every h_i, beta every c_i, and
    jac_bound every |grad c_i(x)|. batched_c, when given, evaluates all the
    c_i in one call.
    """
    h_components: List[ProxFunction]
    c_components: List[SmoothMap]
    g: ProxFunction
    name: str = "finite_sum"
    batched_c: Optional[SmoothMap] = None

    def __post_init__(self):
        if len(self.h_components) != len(self.c_components):
            raise DimensionMismatch(f"FiniteSumProblem: {len(self.h_components)} h_i for "
                                    f"{len(self.c_components)} c_i")
        if not self.h_components:
            raise ValueError("FiniteSumProblem: at least one component is required")

    @property
    def m(self) -> int:
        return len(self.h_components)

    @property
    def L(self) -> float:
        return float(max(h.lipschitz for h in self.h_components))

    @property
    def beta(self) -> float:
        return float(max(c.beta for c in self.c_components))

    @property
    def jac_bound(self) -> float:
        return float(max(c.opnorm_bound for c in self.c_components))

    @property
    def L_h(self) -> Optional[float]:
        gls = [h.gradient_lipschitz for h in self.h_components]
        return None if any(g is None for g in gls) else float(max(gls))

    @property
    def mu(self) -> float:
        return self.L * self.beta


def aggregate_constants(fs: FiniteSumProblem) -> Dict[str, Optional[float]]:
    """Constants of the aggregate (h, c): L/sqrt(m), beta sqrt(m), sqrt(m) |grad c_i|, L_h/m"""
    root = np.sqrt(fs.m)
    return {"L": fs.L / root, "beta": fs.beta * root, "jac_bound": root * fs.jac_bound,
            "L_h": None if fs.L_h is None else fs.L_h / fs.m}


def as_composite(fs: FiniteSumProblem) -> CompositeProblem:
    """
    The aggregate problem h(z) = (1/m) sum h_i(z_i), c = (c_1, ..., c_m) with mu = L beta.

    Raises:
        DimensionMismatch: when components disagree on the input dimension
    """
    consts = aggregate_constants(fs)
    h = SeparableSum(fs.h_components, weight=1.0 / fs.m)
    # the aggregate Lipschitz constant is at most L/sqrt(m); pin it so mu = L beta exactly
    h.lipschitz = consts["L"]
    h.component_count = fs.m
    c = StackedMap(fs.c_components, beta=consts["beta"], opnorm_bound=consts["jac_bound"], batched=fs.batched_c)
    return CompositeProblem(g=fs.g, h=h, c=c, name=fs.name)


def smoothed_components(fs: FiniteSumProblem, nu: float) -> FiniteSumProblem:
    """
    Replace each h_i by m (h_i/m)_nu, whose derivative is (m/nu)-Lipschitz.

    m (h/m)_nu is the envelope h_{nu/m}; components sharing one h share one envelope.
    """
    if nu <= 0:
        raise ValueError("smoothed_components: nu must be positive")
    envelopes: Dict[int, MoreauEnvelope] = {}
    comps = []
    for h in fs.h_components:
        if id(h) not in envelopes:
            envelopes[id(h)] = MoreauEnvelope(h, nu / fs.m)
        comps.append(envelopes[id(h)])
    return FiniteSumProblem(h_components=comps, c_components=fs.c_components, g=fs.g,
                            name=f"{fs.name}_smoothed", batched_c=fs.batched_c)



def finite_sum_smoothing_nu(fs: FiniteSumProblem, eps: float) -> float:
    """nu = m eps^2 / (2 L^3 beta)"""
    return fs.m * eps ** 2 / (2.0 * fs.L ** 3 * fs.beta)


# ============================================================================
# PROX-SVRG
# ============================================================================

@dataclass
class FiniteSumInstance:
    """
    min (1/m) sum_i f_i(z) + p(z) with f_i(z) = h_i(c_i(x) + <grad c_i(x), z - x>).

    Every f_i gradient is h_i'(u_i) grad c_i(x), so batches of them reduce to
    scalar derivatives h_i'(u_i); a shared elementwise h takes the whole batch
    in one call. Component gradients are counted in n_grad_component.
    """
    h_components: List[ProxFunction]
    offsets: np.ndarray
    grads: np.ndarray
    center: np.ndarray
    p: ProxFunction
    ell: float
    counters: OracleCounters = field(default_factory=OracleCounters)

    def __post_init__(self):
        first = self.h_components[0]
        self.shared_h = first if first.elementwise and all(h is first for h in self.h_components) else None

    @property
    def m(self) -> int:
        return len(self.h_components)

    @property
    def L_f(self) -> float:
        return max(self.ell, _ELL_FLOOR)

    @property
    def alpha(self) -> float:
        return float(self.p.strong_convexity)

    def _arguments(self, z: np.ndarray) -> np.ndarray:
        return self.offsets + self.grads @ (np.asarray(z, dtype=float) - self.center)

    def derivatives(self, idx: np.ndarray, z: np.ndarray) -> np.ndarray:
        """h_i'(u_i(z)) for the indices idx, counted as len(idx) component gradients"""
        idx = np.asarray(idx, dtype=int)
        self.counters.n_grad_component += idx.shape[0]
        u = self.offsets[idx] + self.grads[idx] @ (np.asarray(z, dtype=float) - self.center)
        if self.shared_h is not None:
            return np.asarray(self.shared_h.gradient(u), dtype=float)
        return np.array([float(np.atleast_1d(self.h_components[i].gradient(u[k:k + 1]))[0])
                         for k, i in enumerate(idx)])

    def component_derivative(self, i: int, z: np.ndarray) -> float:
        self.counters.n_grad_component += 1
        u = self.offsets[i] + float(self.grads[i] @ (np.asarray(z, dtype=float) - self.center))
        return float(np.atleast_1d(self.h_components[i].gradient(np.array([u])))[0])

    def component_gradient(self, i: int, z: np.ndarray) -> np.ndarray:
        return self.component_derivative(i, z) * self.grads[i]

    def full_gradient(self, z: np.ndarray) -> np.ndarray:
        return self.grads.T @ self.derivatives(np.arange(self.m), z) / self.m

    def f_value(self, z: np.ndarray) -> float:
        u = self._arguments(z)
        if self.shared_h is not None:
            return float(self.shared_h.value(u)) / self.m
        return float(np.mean([h.value(u[i:i + 1]) for i, h in enumerate(self.h_components)]))

    def value(self, z: np.ndarray) -> float:
        return self.f_value(z) + self.p.value(z)

    def prox_grad_step(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.p.prox(1.0 / self.L_f, z - self.full_gradient(z) / self.L_f)


def subproblem_instance(fs: FiniteSumProblem, model: LinearizedModel) -> FiniteSumInstance:
    """
    F_t(.; x) of the aggregate model written as a finite sum.

    ell = L_h max_i |grad c_i(x)|^2 and p = g + |. - x|^2/(2t), alpha = 1/t + alpha_g.
    The m Jacobian rows are counted as m vjp calls.
    """
    L_h = fs.L_h
    if L_h is None:
        raise ValueError("subproblem_instance: every h_i must be smooth")
    x = model.y
    grads = StackedMap(fs.c_components, beta=fs.beta, batched=fs.batched_c).rows(x)
    model.problem.counters.n_vjp += fs.m
    ell = L_h * float(np.max(np.sum(grads ** 2, axis=1)))
    return FiniteSumInstance(h_components=fs.h_components, offsets=np.asarray(model.c_y, dtype=float),
                             grads=grads, center=np.asarray(x, dtype=float), p=proximal_term(model),
                             ell=ell, counters=model.problem.counters)



def resolve_svrg(inst: FiniteSumInstance, cfg: SvrgConfig) -> Tuple[float, int]:
    """(eta, J), defaulting to step_factor/ell and ceil(inner_factor * ell/alpha)"""
    if inst.alpha <= 0:
        raise ValueError("prox_svrg_run: p must be strongly convex")
    eta = cfg.eta if cfg.eta is not None else cfg.step_factor / inst.L_f
    J = cfg.J if cfg.J is not None else int(np.ceil(cfg.inner_factor * inst.L_f / inst.alpha))
    if eta <= 0 or J < 1:
        raise ValueError(f"prox_svrg_run: need eta > 0 and J >= 1, got ({eta}, {J})")
    return eta, J


def svrg_index_stream(seed: int, epoch: int, J: int, m: int, stream: int = 0) -> np.ndarray:
    """Component indices i_1..i_J of one epoch, reproducible from (seed, stream, epoch)"""
    return np.random.default_rng([seed, stream, epoch]).integers(0, m, size=J)


def prox_svrg_run(inst: FiniteSumInstance, x0, cfg: SvrgConfig, stream: int = 0) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Prox-SVRG.

    Each epoch takes the full gradient at the snapshot, then J variance-reduced
    proximal steps; the epoch output is the average of the inner iterates.
    One epoch costs m + 2J component gradients.

    Args:
        inst: Finite-sum instance with alpha > 0
        x0: Starting snapshot
        cfg: Step, inner length, epoch count and seed
        stream: Extra seed word distinguishing calls that share cfg.seed

    Returns:
        Tuple[np.ndarray, List[np.ndarray]]: Final snapshot and the snapshots x_0..x_S
    """
    eta, J = resolve_svrg(inst, cfg)
    snapshot = as_vector(x0)
    history = [snapshot.copy()]
    for epoch in range(1, cfg.epochs + 1):
        v_full = inst.full_gradient(snapshot)
        drawn = svrg_index_stream(cfg.seed, epoch, J, inst.m, stream)
        # snapshot terms of the J drawn components in one batch
        snap_terms = inst.derivatives(drawn, snapshot)
        x = snapshot.copy()
        running = np.zeros_like(x)
        for i, s in zip(drawn, snap_terms):
            v = v_full + (inst.component_derivative(int(i), x) - s) * inst.grads[i]
            x = inst.p.prox(eta, x - eta * v)
            running += x
        snapshot = running / J
        history.append(snapshot.copy())
    logger.debug(f"ProxSVRG: {cfg.epochs} epochs of J={J}, eta={eta:.3e}")
    return snapshot, history


def svrg_plus_constants(ell: float) -> Tuple[float, float]:
    """Subscheme constants of Prox-SVRG after one prox-gradient step, per epoch"""
    return plus_constants(1.0, 1.0 - SVRG_EPOCH_RATE, ell)


class SvrgMethod:
    """
    Prox-SVRG on finite-sum subproblems; one iteration is one epoch with
    functional rate E[gap_s] <= 0.9^s gap_0.
    """

    name = "svrg"
    stochastic = True

    def __init__(self, fs: FiniteSumProblem, cfg: SvrgConfig):
        self.fs = fs
        self.cfg = cfg
        self.calls = 0

    def instance(self, model: LinearizedModel) -> FiniteSumInstance:
        return subproblem_instance(self.fs, model)

    def functional_constants(self, inst: FiniteSumInstance) -> Tuple[float, float]:
        return 1.0, 1.0 - SVRG_EPOCH_RATE

    def run_instance(self, inst: FiniteSumInstance, z0: np.ndarray, n_iters: int) -> np.ndarray:
        self.calls += 1
        cfg = SvrgConfig(eta=self.cfg.eta, J=self.cfg.J, epochs=n_iters, seed=self.cfg.seed,
                         step_factor=self.cfg.step_factor, inner_factor=self.cfg.inner_factor)
        x, _ = prox_svrg_run(inst, z0, cfg, stream=self.calls)
        return x


def katyusha_constants(m: int, kappa: float) -> Tuple[float, float]:
    """Functional rate constants (4, tau) with 1 - tau = (1 + sqrt(2m/(3 kappa)))^(-1) per epoch"""
    r = np.sqrt(2.0 * m / (3.0 * kappa))
    return 4.0, float(r / (1.0 + r))


class KatyushaSlot(LinearlyConvergentSubscheme):
    """Rate constants of an accelerated variance-reduced method; no runner"""

    name = "katyusha"
    stochastic = True

    def __init__(self, fs: FiniteSumProblem):
        self.fs = fs

    def constants(self, model: LinearizedModel) -> Tuple[float, float]:
        inst = subproblem_instance(self.fs, model)
        gamma, tau = katyusha_constants(self.fs.m, inst.L_f / inst.alpha)
        return plus_constants(gamma, tau, inst.L_f)

    def run(self, model: LinearizedModel, z0: np.ndarray, n_iters: int) -> np.ndarray:
        raise NotImplementedError("KatyushaSlot: only the rate constants are provided")


def finite_sum_total_cost(m: int, L: float, beta: float, jac_bound: float, gap0: float, eps: float,
                          inner_factor: float = 100.0) -> Dict[str, float]:
    """
    Component-gradient estimate of the smoothed finite-sum strategy with Prox-SVRG+ subsolves.

    Returns:
        Dict: nu, outer steps, epochs per step, epoch cost and total
    """
    mu = L * beta
    nu = m * eps ** 2 / (2.0 * L ** 3 * beta)
    ell = (m / nu) * jac_bound ** 2
    t = 1.0 / mu
    kappa = ell * t
    J = int(np.ceil(inner_factor * kappa))
    gamma, tau = svrg_plus_constants(ell)
    epochs = max(1, int(np.ceil(np.log(4.0 * t * gamma) / tau)))
    outer = int(np.ceil(16.0 * mu * gap0 / eps ** 2))
    epoch_cost = m + 2 * J
    return {"nu": nu, "outer": outer, "epochs_per_step": epochs, "epoch_cost": float(epoch_cost),
            "total": float(outer * epochs * epoch_cost)}


# ============================================================================
# DRIVER
# ============================================================================

def run_finite_sum_driver(fs: FiniteSumProblem, x0, eps: float, mode: FiniteSumMode = FiniteSumMode.SMOOTHED,
                          svrg: Optional[SvrgConfig] = None, max_outer: int = 200) -> Tuple[np.ndarray, Trace]:
    """
    Coupled prox-linear method at t = 1/mu with Prox-SVRG+ subsolves.

    SMOOTH needs smooth h_i; SMOOTHED replaces h_i by m (h_i/m)_nu with
    nu = m eps^2 / (2 L^3 beta). The outer loop stops once an uncounted
    high-accuracy solve certifies |G_{1/mu}| <= eps/2 on the working problem,
    which bounds |G_{1/mu}| of the original problem by eps. The returned point
    carries that bound recomputed on the original problem in
    trace.summary["certified_prox_grad_norm"].

    Args:
        fs: Finite-sum problem
        x0: Starting point
        eps: Target accuracy on |G_{1/mu}|
        mode: SMOOTH or SMOOTHED
        svrg: Prox-SVRG settings (seed, overrides of eta and J)
        max_outer: Outer iteration cap

    Returns:
        Tuple[np.ndarray, Trace]: Last iterate and trace
    """
    svrg = svrg or SvrgConfig()
    if mode == FiniteSumMode.SMOOTH:
        if fs.L_h is None:
            raise ValueError("run_finite_sum_driver: SMOOTH mode requires smooth h_i")
        working = fs
    else:
        nu = finite_sum_smoothing_nu(fs, eps)
        working = smoothed_components(fs, nu)
        logger.info(f"FiniteSumDriver: smoothing with nu={nu:.3e}, component L_h={working.L_h:.3e}")
    t = 1.0 / fs.mu
    cfg = ProxLinearConfig(t=t, max_outer=max_outer, stop_tol=0.5 * eps,
                           subscheme=wrap_plus(SvrgMethod(working, svrg)), check_guarantees=False,
                           reference_grad=True)
    trace = run_coupled(as_composite(working), x0, cfg)
    trace.solver = f"finite_sum_{mode.value}"
    x_out = trace.x_out
    surrogate = trace.records[-1].prox_grad_true
    trace.summary["surrogate_prox_grad_norm"] = surrogate
    trace.summary["surrogate_certified"] = bool(surrogate is not None and surrogate <= 0.5 * eps)
    certified = float(np.linalg.norm(reference_step(as_composite(fs), x_out, t)[1]))
    trace.summary["certified_prox_grad_norm"] = certified
    logger.info(f"FiniteSumDriver: |G_1/mu(x_out)| = {certified:.3e} after {len(trace.records)} outer steps, "
                f"{trace.totals.n_grad_component} component gradients")
    return x_out, trace
