import numpy as np

from data_models import OracleCounters
from performance_monitor import PerformanceMonitor


def test_increments_sum_to_totals():
    counters = OracleCounters()
    monitor = PerformanceMonitor("demo", counters)
    for k, (evals, proxes) in enumerate([(1, 0), (3, 2), (0, 5)]):
        counters.n_c_eval += evals
        counters.n_prox_h += proxes
        monitor.record_iterate(k, 1.0, 1.0)
    trace = monitor.finish(None)
    total = OracleCounters()
    for record in trace.records:
        total.add(record.increment)
    assert total == trace.totals
    assert trace.totals.basic_operations() == 11
    assert trace.records[1].increment.n_c_eval == 3
    assert trace.x_out is None


def test_checks_and_summary():
    counters = OracleCounters()
    monitor = PerformanceMonitor("demo", counters)
    monitor.record_iterate(0, 2.0, 0.5, inner_iters=4)
    monitor.record_iterate(1, 1.0, 0.25, inner_iters=6)
    assert monitor.record_check("ok", 0, 1.0, 1.0).passed
    assert monitor.record_check("slack", 0, 1.0 + 1e-12, 1.0, slack=1e-9).passed
    assert not monitor.record_check("bad", 1, 2.0, 1.0).passed
    assert monitor.record_check("skipped", 1, 2.0, 1.0, skipped=True).passed
    trace = monitor.finish(np.ones(3))
    summary = trace.summary
    assert summary["iterations"] == 2
    assert summary["failed_checks"] == 1
    assert summary["statistics"]["inner_iters"]["total"] == 10.0
    assert summary["statistics"]["F"]["min"] == 1.0
    assert [c.name for c in trace.failed_checks()] == ["bad"]
    np.testing.assert_array_equal(trace.x_out, np.ones(3))


def test_empty_summary():
    trace = PerformanceMonitor("empty", OracleCounters()).finish(None)
    assert trace.summary["message"] == "No iterates recorded"
