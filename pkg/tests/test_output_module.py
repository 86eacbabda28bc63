import numpy as np

from data_models import OracleCounters
from output_module import (CHECK_COLUMNS, COMPARE_COLUMNS, TRACE_COLUMNS, checks_path, compare_rows,
                           read_trace_csv, write_checks_csv, write_compare_csv, write_trace_csv)
from performance_monitor import PerformanceMonitor


def make_trace(name, steps, evals_per_step):
    counters = OracleCounters()
    monitor = PerformanceMonitor(name, counters)
    for k in range(steps):
        counters.n_c_eval += evals_per_step
        monitor.record_iterate(k, 1.0 / (k + 1), 0.5 ** k, step_norm=0.1, prox_grad_true=None)
    monitor.record_check("descent", 0, 1.0, 2.0)
    monitor.record_check("bound", 1, 3.0, 2.0)
    return monitor.finish(np.zeros(2))


def test_trace_csv(tmp_path):
    path = tmp_path / "nested" / "trace.csv"
    assert write_trace_csv(make_trace("a", 3, 2), str(path)) == 3
    rows = read_trace_csv(str(path))
    assert list(rows[0]) == TRACE_COLUMNS
    assert [row["n_c_eval"] for row in rows] == ["2", "4", "6"]
    assert all(row["wall_ns"] == "0" for row in rows)
    assert rows[0]["proxgrad_norm_true"] == ""
    assert float(rows[2]["F"]) == 1.0 / 3.0


def test_timing_keeps_wall_clock(tmp_path):
    path = tmp_path / "timed.csv"
    write_trace_csv(make_trace("a", 2, 1), str(path), timing=True)
    assert int(read_trace_csv(str(path))[-1]["wall_ns"]) > 0


def test_checks_path():
    assert checks_path("out/run.csv") == "out/run_checks.csv"
    assert checks_path("out/run") == "out/run_checks.csv"


def test_checks_csv(tmp_path):
    path = tmp_path / "checks.csv"
    assert write_checks_csv([make_trace("a", 1, 1), make_trace("b", 1, 1)], str(path)) == 4
    rows = read_trace_csv(str(path))
    assert list(rows[0]) == ["solver"] + CHECK_COLUMNS
    assert [row["passed"] for row in rows] == ["1", "0", "1", "0"]


def test_compare_rows_ordering(tmp_path):
    cheap, costly = make_trace("cheap", 3, 1), make_trace("costly", 3, 2)
    rows = compare_rows([costly, cheap])
    ops = [int(row["basic_operations"]) for row in rows]
    assert ops == [1, 2, 2, 3, 4, 6]
    tied = [row["solver"] for row in rows if row["basic_operations"] == "2"]
    assert tied == ["costly", "cheap"]
    path = tmp_path / "compare.csv"
    assert write_compare_csv([costly, cheap], str(path)) == 6
    assert list(read_trace_csv(str(path))[0]) == COMPARE_COLUMNS
