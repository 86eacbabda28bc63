"""
Performance Monitor Module
Per-run bookkeeping: iterate records, oracle-count increments, guarantee checks and summaries
"""

import logging
import time
from typing import Any, Dict, List, Optional

import numpy as np

from data_models import GuaranteeCheck, IterateRecord, OracleCounters, Trace

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """
    Performance Monitor: Owns the trace of one solver run.

    Responsibilities:
    - Snapshot the run's oracle counters at every recorded iterate
    - Store the per-iterate increments so they sum to the final totals
    - Record guarantee checks (lhs <= rhs + slack) as they are evaluated
    - Summarize the run
    """

    def __init__(self, solver: str, counters: OracleCounters):
        self.trace = Trace(solver=solver)
        self.counters = counters
        self._last = counters.copy()
        self._start_ns = time.perf_counter_ns()
        logger.info(f"PerformanceMonitor: Started run '{solver}'")

    def record_iterate(self, k: int, F_val: float, prox_grad_norm: float, **fields: Any) -> IterateRecord:
        """
        Append an iterate record.

        Args:
            k: Outer iteration index
            F_val: Objective value at the iterate
            prox_grad_norm: |G_t| or its surrogate
            **fields: Any other IterateRecord field (step_norm, inner_iters, eps_k, ...)

        Returns:
            IterateRecord: The stored record
        """
        snapshot = self.counters.copy()
        record = IterateRecord(k=k, F_val=F_val, prox_grad_norm=prox_grad_norm,
                               counters=snapshot, increment=snapshot.minus(self._last),
                               wall_ns=time.perf_counter_ns() - self._start_ns, **fields)
        self._last = snapshot
        self.trace.records.append(record)
        logger.debug(f"PerformanceMonitor: {self.trace.solver} k={k} F={F_val:.10g} |G|={prox_grad_norm:.3e}")
        return record

    def record_check(self, name: str, k: int, lhs: float, rhs: float, slack: float = 0.0,
                     skipped: bool = False, note: str = "") -> GuaranteeCheck:
        """Append a guarantee check; failures are logged as warnings"""
        check = GuaranteeCheck(name=name, k=k, lhs=float(lhs), rhs=float(rhs), slack=slack,
                               skipped=skipped, note=note)
        self.trace.checks.append(check)
        if skipped:
            logger.warning(f"PerformanceMonitor: Check '{name}' skipped at k={k}: {note}")
        elif not check.passed:
            logger.warning(f"PerformanceMonitor: Check '{name}' failed at k={k}: {lhs:.6e} > {rhs:.6e}")
        return check

    def finish(self, x_out: Optional[np.ndarray]) -> Trace:
        self.trace.x_out = None if x_out is None else np.array(x_out, dtype=float)
        self.trace.totals = self.counters.copy()
        self.trace.summary = self.get_metrics_summary()
        logger.info(f"PerformanceMonitor: Finished run '{self.trace.solver}' after "
                    f"{len(self.trace.records)} records, {self.trace.totals.basic_operations()} basic operations, "
                    f"{len(self.trace.failed_checks())} failed checks")
        return self.trace

    def get_metrics_summary(self) -> Dict[str, Any]:
        """
        Summary statistics of the run.

        Returns:
            Dict: count/average/min/max/total per tracked quantity plus check tallies
        """
        records = self.trace.records
        if not records:
            return {"message": "No iterates recorded", "checks": len(self.trace.checks)}

        series: Dict[str, List[float]] = {
            "F": [r.F_val for r in records],
            "prox_grad_norm": [r.prox_grad_norm for r in records],
            "step_norm": [r.step_norm for r in records],
            "inner_iters": [float(r.inner_iters) for r in records],
            "basic_operations": [float(r.increment.basic_operations()) for r in records],
        }
        statistics = {}
        for key, values in series.items():
            statistics[key] = {
                "count": len(values),
                "average": sum(values) / len(values),
                "min": min(values),
                "max": max(values),
                "total": sum(values)
            }
        return {
            "solver": self.trace.solver,
            "iterations": len(records),
            "totals": self.counters.as_dict(),
            "checks": len(self.trace.checks),
            "failed_checks": len(self.trace.failed_checks()),
            "elapsed_seconds": (time.perf_counter_ns() - self._start_ns) / 1e9,
            "statistics": statistics,
        }
