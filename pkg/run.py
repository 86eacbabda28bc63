"""
Run
Command-line experiment runner: run one solver, verify an instance, or compare solvers
"""

import argparse
import logging
import sys
import time
from typing import List, Optional

import numpy as np

from errors import ConfigError, SolverError
from finite_sum import FiniteSumProblem
from output_module import checks_path, write_checks_csv, write_compare_csv, write_trace_csv
from problems import ProblemInstance, make_instance
from run_config import RunConfig, load_config, solver_specs
from solver_manager import SolverManager
from verify import verification_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


class Timer:
    def __init__(self):
        self.items = {}
        self.time_scale = 1000.0  # ms
        self.time_unit = "ms"

    def start(self, name: str) -> None:
        self.items[name] = time.perf_counter()
        logger.info(f"{name} ...")

    def end(self, name: str) -> Optional[float]:
        if name not in self.items:
            return None
        delta = (time.perf_counter() - self.items.pop(name)) * self.time_scale
        logger.info(f"{name} finished in {delta:.2f}{self.time_unit}.")
        return delta


timer = Timer()


def build_instance(cfg: RunConfig) -> ProblemInstance:
    """Instance from the config; beta_scale rescales the declared beta of every map"""
    try:
        instance = make_instance(cfg.instance.name, seed=cfg.instance.seed, **cfg.instance.params)
    except (KeyError, TypeError) as e:
        raise ConfigError(f"build_instance: {str(e)}")
    if cfg.instance.beta_scale != 1.0:
        problem = instance.problem
        maps = problem.c_components if isinstance(problem, FiniteSumProblem) else [problem.c]
        for c in maps:
            c.beta = c.beta * cfg.instance.beta_scale
        logger.warning(f"Run: declared beta scaled by {cfg.instance.beta_scale}")
    return instance


def cmd_run(cfg: RunConfig) -> int:
    instance = build_instance(cfg)
    spec = solver_specs(cfg)[0]
    manager = SolverManager()
    timer.start(f"Running {spec.name}")
    trace = manager.run(instance, spec)
    timer.end(f"Running {spec.name}")
    if trace is None:
        logger.error(f"Run: solver failed: {manager.last_error}")
        return EXIT_FAILED
    write_trace_csv(trace, cfg.output.path, timing=cfg.output.timing)
    write_checks_csv([trace], checks_path(cfg.output.path))
    failed = trace.failed_checks()
    for check in failed:
        logger.error(f"Run: check '{check.name}' failed at k={check.k}: {check.lhs:.6e} > {check.rhs:.6e}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    instance = build_instance(cfg)
    problem = instance.composite
    vc = cfg.verify
    rng = np.random.default_rng(cfg.instance.seed)
    points = [instance.x0 + rng.uniform(-vc.point_radius, vc.point_radius, instance.x0.shape[0])
              for _ in range(vc.n_points)]
    if problem.g.domain_diameter is not None:
        points = [problem.g.prox(1.0, p) for p in points]
    timer.start(f"Verifying {instance.name}")
    try:
        trace = verification_suite(problem, points, t_factors=vc.t_factors, rho=instance.rho, n_probe=vc.n_probe,
                                   probe_radius=vc.probe_radius, seed=cfg.instance.seed, sandwich=vc.sandwich,
                                   probes=vc.probes, prox_calculus=vc.prox_calculus)
    except SolverError as e:
        logger.error(f"Verify: Error verifying {instance.name}: {str(e)}")
        return EXIT_FAILED
    timer.end(f"Verifying {instance.name}")
    write_checks_csv([trace], cfg.output.path)
    failed = trace.failed_checks()
    for check in failed:
        logger.error(f"Verify: '{check.name}' failed at {check.k}: {check.lhs:.6e} > {check.rhs:.6e}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    instance = build_instance(cfg)
    manager = SolverManager()
    traces, status = [], EXIT_OK
    for spec in solver_specs(cfg):
        label = spec.label or spec.name
        timer.start(f"Running {label}")
        trace = manager.run(instance, spec)
        timer.end(f"Running {label}")
        if trace is None:
            logger.error(f"Compare: '{label}' failed: {manager.last_error}")
            status = EXIT_FAILED
            continue
        if trace.failed_checks():
            status = EXIT_FAILED
        traces.append(trace)
    write_compare_csv(traces, cfg.output.path, timing=cfg.output.timing)
    write_checks_csv(traces, checks_path(cfg.output.path))
    return status


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Prox-linear solvers for composite problems g + h(c(x)).")
    parser.add_argument("command", choices=sorted(COMMANDS), help="run one solver, verify an instance, or compare")
    parser.add_argument("--config", required=True, type=str, help="Path to the YAML run config.")
    parser.add_argument("--out", default=None, type=str, help="Output CSV path, overriding output.path.")
    parser.add_argument("--seed", default=None, type=int, help="Seed overriding the instance and solver seeds.")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point.

    Returns:
        int: 0 ok, 1 failed check or solver error, 2 usage or config error
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(format="%(asctime)s - %(levelname)s - %(message)s",
                        level=logging.WARNING if args.quiet else logging.INFO, force=True)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        logger.error(f"Run: Error in configuration: {str(e)}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
