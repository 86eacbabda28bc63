"""
Output Module
Writes solver traces, guarantee checks and joined comparisons as CSV files
"""

import csv
import logging
import os
from typing import Dict, Iterable, List, Optional

from data_models import IterateRecord, Trace

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["k", "F", "proxgrad_norm_surrogate", "proxgrad_norm_true", "step_norm", "eps_k", "delta_k",
                 "inner_iters", "n_c_eval", "n_jvp", "n_vjp", "n_prox_h", "n_prox_g", "wall_ns"]
COMPARE_COLUMNS = ["basic_operations", "solver"] + TRACE_COLUMNS
CHECK_COLUMNS = ["name", "k", "lhs", "rhs", "slack", "passed", "skipped", "note"]


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, int)):
        return str(int(value))
    return f"{float(value):.17g}"


def record_row(record: IterateRecord, timing: bool = False) -> Dict[str, str]:
    """One CSV row; counters are cumulative over the run"""
    c = record.counters
    return {
        "k": str(record.k),
        "F": _fmt(record.F_val),
        "proxgrad_norm_surrogate": _fmt(record.prox_grad_norm),
        "proxgrad_norm_true": _fmt(record.prox_grad_true),
        "step_norm": _fmt(record.step_norm),
        "eps_k": _fmt(record.eps_k),
        "delta_k": _fmt(record.delta_k),
        "inner_iters": str(record.inner_iters),
        "n_c_eval": str(c.n_c_eval),
        "n_jvp": str(c.n_jvp),
        "n_vjp": str(c.n_vjp),
        "n_prox_h": str(c.n_prox_h),
        "n_prox_g": str(c.n_prox_g),
        "wall_ns": str(record.wall_ns if timing else 0),
    }


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_trace_csv(trace: Trace, path: str, timing: bool = False) -> int:
    """
    Write one row per iterate record.

    Returns:
        int: Number of rows written
    """
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for record in trace.records:
            writer.writerow(record_row(record, timing))
    logger.info(f"OutputModule: Wrote {len(trace.records)} rows of '{trace.solver}' to {path}")
    return len(trace.records)


def checks_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}_checks{ext or '.csv'}"


def write_checks_csv(traces: Iterable[Trace], path: str) -> int:
    """Write every guarantee check, prefixed with the solver name"""
    _ensure_parent(path)
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["solver"] + CHECK_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for trace in traces:
            for check in trace.checks:
                writer.writerow({"solver": trace.solver, "name": check.name, "k": str(check.k),
                                 "lhs": _fmt(check.lhs), "rhs": _fmt(check.rhs), "slack": _fmt(check.slack),
                                 "passed": _fmt(check.passed), "skipped": _fmt(check.skipped), "note": check.note})
                n += 1
    return n


def compare_rows(traces: List[Trace], timing: bool = False) -> List[Dict[str, str]]:
    """Rows of all traces ordered by cumulative basic operations, ties broken by solver order"""
    keyed = []
    for order, trace in enumerate(traces):
        for record in trace.records:
            row = record_row(record, timing)
            ops = record.counters.basic_operations()
            row.update({"basic_operations": str(ops), "solver": trace.solver})
            keyed.append((ops, order, record.k, row))
    keyed.sort(key=lambda item: item[:3])
    return [row for *_, row in keyed]


def write_compare_csv(traces: List[Trace], path: str, timing: bool = False) -> int:
    """Joined CSV keyed by cumulative basic-operation count"""
    rows = compare_rows(traces, timing)
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"OutputModule: Wrote {len(rows)} joined rows of {len(traces)} solvers to {path}")
    return len(rows)


def read_trace_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
