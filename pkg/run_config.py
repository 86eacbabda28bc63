"""
Run Config
Structured YAML configuration for the experiment runner, validated by omegaconf
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from omegaconf import MISSING, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from data_models import ErrorSchedule, ScheduleKind
from errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class InstanceConfig:
    """Zoo instance: builder name, seed and keyword parameters"""
    name: str = MISSING
    seed: int = 0
    params: Dict[str, Any] = field(default_factory=dict)
    # multiplies the declared beta; values below 1 build a corrupted instance
    beta_scale: float = 1.0


@dataclass
class ScheduleConfig:
    kind: str = "zero"
    scale: float = 0.0
    q: float = 1.0
    cap: Optional[float] = None

    def build(self) -> ErrorSchedule:
        try:
            kind = ScheduleKind(self.kind)
        except ValueError:
            raise ConfigError(f"ScheduleConfig: unknown schedule kind '{self.kind}'")
        return ErrorSchedule(kind=kind, scale=self.scale, q=self.q, cap=self.cap)


@dataclass
class SolverConfig:
    """
    One solver run. Fields a solver does not use are ignored by it.

    t defaults to 1/mu; mu_tilde defaults to mu_tilde_factor * mu.
    """
    name: str = MISSING
    label: Optional[str] = None
    t: Optional[float] = None
    max_outer: int = 100
    stop_tol: float = 0.0
    inner: str = "exact"
    inner_cap: int = 200000
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    delta_schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    check_guarantees: bool = True
    reference_grad: bool = False
    eps_target: float = 1e-2
    budget_q: float = 1.0
    budget_T: Optional[int] = None
    N: int = 50
    mu_tilde: Optional[float] = None
    mu_tilde_factor: float = 2.0
    weights: str = "standard"
    t0: Optional[float] = None
    eta: float = 0.5
    alpha_bt: float = 0.5
    use_reference: bool = True
    seed: int = 0
    svrg_epochs: int = 1
    svrg_step_factor: float = 0.1
    svrg_inner_factor: float = 100.0
    finite_sum_mode: str = "smoothed"


@dataclass
class VerifyConfig:
    """Toggles and sizes of the verify suites"""
    n_points: int = 20
    point_radius: float = 1.0
    t_factors: List[float] = field(default_factory=lambda: [1.0, 0.5])
    n_probe: int = 1000
    probe_radius: float = 1.0
    sandwich: bool = True
    probes: bool = True
    prox_calculus: bool = True


@dataclass
class OutputConfig:
    path: str = "trace.csv"
    # wall_ns is written as 0 unless timing is on, which keeps CSVs reproducible
    timing: bool = False


@dataclass
class RunConfig:
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    solver: Optional[SolverConfig] = None
    solvers: List[SolverConfig] = field(default_factory=list)
    output: OutputConfig = field(default_factory=OutputConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)


def load_config(path: str, seed: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """
    Load a YAML run config onto the RunConfig schema.

    Args:
        path: YAML file
        seed: Overrides instance.seed and every solver seed
        out: Overrides output.path

    Returns:
        RunConfig: Validated config object

    Raises:
        ConfigError: missing file, unknown keys or type errors
    """
    if not os.path.isfile(path):
        raise ConfigError(f"load_config: config file '{path}' not found")
    try:
        schema = OmegaConf.structured(RunConfig)
        merged = OmegaConf.merge(schema, OmegaConf.load(path))
        if seed is not None:
            merged.instance.seed = seed
            if merged.solver is not None:
                merged.solver.seed = seed
            for spec in merged.solvers:
                spec.seed = seed
        if out is not None:
            merged.output.path = out
        cfg: RunConfig = OmegaConf.to_object(merged)
    except OmegaConfBaseException as e:
        raise ConfigError(f"load_config: invalid config '{path}': {str(e)}")
    logger.info(f"RunConfig: Loaded '{path}' for instance '{cfg.instance.name}'")
    return cfg


def solver_specs(cfg: RunConfig) -> List[SolverConfig]:
    """The solver list of a config: `solvers` when given, else the single `solver`"""
    specs = list(cfg.solvers)
    if cfg.solver is not None:
        specs.insert(0, cfg.solver)
    if not specs:
        raise ConfigError("solver_specs: the config names no solver")
    return specs
