import numpy as np
import pytest

from accelerated import (CurvatureInfo, accel_weights, accelerated_value_bound, backtrack, backtrack_trial_bound,
                         build_two_center, gap_constant_A, run_accelerated, run_accelerated_backtracking,
                         run_accelerated_inexact_gap, run_accelerated_inexact_stationary, three_point_gap)
from core_engine import CompositeProblem, objective_value
from data_models import BacktrackState, ErrorSchedule
from errors import BudgetExhausted, InvalidMuTilde
from interfaces import SmoothMap
from problems import AffineMap, make_additive_composite
from prox_toolbox import BoxIndicator, L1Norm, LinearFunction
from subproblem import build_model, model_value, solve_exact


def lad_info(instance):
    return CurvatureInfo(x_star=instance.x_star, rho=0.0, r=0.0)


def test_weights():
    np.testing.assert_allclose(accel_weights(4), [1.0, 2 / 3, 0.5, 0.4])
    fista = accel_weights(5, "fista")
    assert fista[0] == 1.0
    for prev, a in zip(fista, fista[1:]):
        assert (1 - a) / a ** 2 == pytest.approx(1 / prev ** 2)
    with pytest.raises(ValueError):
        accel_weights(3, "heavy_ball")


def test_lad_value_bound(lad_small):
    problem = lad_small.problem
    N = 30
    trace = run_accelerated(problem, lad_small.x0, lad_small.x0, 1.0, N, info=lad_info(lad_small))
    dist0_sq = float(np.sum((lad_small.x_star - lad_small.x0) ** 2))
    gap = trace.F_values()[-1] - lad_small.f_inf
    assert gap <= accelerated_value_bound(N, 1.0, dist0_sq) + 1e-8
    assert len(trace.checks_named("accelerated_min_grad")) == N
    assert trace.checks_named("telescoping")
    assert trace.all_checks_pass(), trace.failed_checks()
    assert [r.k for r in trace.records] == list(range(1, N + 1))


@pytest.mark.slow
def test_lad_value_bound_at_every_step(lad_small):
    N = 200
    trace = run_accelerated(lad_small.problem, lad_small.x0, lad_small.x0, 1.0, N, info=lad_info(lad_small))
    dist0_sq = float(np.sum((lad_small.x_star - lad_small.x0) ** 2))
    assert len(trace.records) == N
    for record in trace.records:
        assert record.F_val - lad_small.f_inf <= accelerated_value_bound(record.k, 1.0, dist0_sq) + 1e-8
    assert trace.all_checks_pass(), trace.failed_checks()


def test_first_step_ignores_x0(phase_small, rng):
    problem = phase_small.problem
    mu_tilde = 2.0 * problem.mu
    v0 = phase_small.x0
    a = run_accelerated(problem, v0 + rng.standard_normal(5), v0, mu_tilde, 1)
    b = run_accelerated(problem, v0 - rng.standard_normal(5), v0, mu_tilde, 1)
    np.testing.assert_allclose(a.records[0].x, b.records[0].x, atol=1e-12)


def test_zero_errors_match_exact_run(phase_small):
    problem = phase_small.problem
    mu_tilde = 2.0 * problem.mu
    exact = run_accelerated(problem, phase_small.x0, phase_small.x0, mu_tilde, 6)
    zero = ErrorSchedule.zero()
    gap = run_accelerated_inexact_gap(problem, phase_small.x0, phase_small.x0, mu_tilde, 6, zero, zero)
    dual = run_accelerated_inexact_stationary(problem, phase_small.x0, phase_small.x0, mu_tilde, 6, zero, zero)
    np.testing.assert_allclose(gap.F_values(), exact.F_values(), rtol=1e-12)
    np.testing.assert_allclose(dual.F_values(), exact.F_values(), rtol=1e-12)


def test_inexact_gap_on_lad(lad_small):
    schedule = ErrorSchedule.power_law(1.0, 3.0)
    assert schedule.eps(2) == pytest.approx(1 / 16)
    trace = run_accelerated_inexact_gap(lad_small.problem, lad_small.x0, lad_small.x0, 1.0, 20, schedule, schedule,
                                        info=lad_info(lad_small))
    assert trace.checks_named("accelerated_gap_min_grad")
    assert trace.all_checks_pass(), trace.failed_checks()
    A = trace.summary["A_N"]
    assert np.isfinite(A["stated"]) and A["proof"] == A["stated"]


def test_inexact_stationary_on_lad(lad_small):
    schedule = ErrorSchedule.power_law(1e-2, 3.0)
    trace = run_accelerated_inexact_stationary(lad_small.problem, lad_small.x0, lad_small.x0, 1.0, 15,
                                               schedule, schedule, info=lad_info(lad_small))
    assert trace.checks_named("accelerated_dual_min_grad")
    assert trace.all_checks_pass(), trace.failed_checks()


def test_gap_constant_without_errors():
    zeros = [0.0] * 5
    A = gap_constant_A(5, 3.0, 1.0, 4.0, None, 0.0, 0.0, zeros, zeros, accel_weights(5))
    assert A["stated"] == pytest.approx(2.0)
    assert A["proof"] == pytest.approx(2.0)
    errs = [1e-3] * 5
    A = gap_constant_A(5, 3.0, 1.0, 4.0, None, 0.0, 0.0, errs, errs, accel_weights(5))
    assert A["proof"] >= A["stated"] > 2.0


def test_mu_tilde_must_exceed_mu(abs_square):
    with pytest.raises(InvalidMuTilde):
        run_accelerated(abs_square.problem, abs_square.x0, abs_square.x0, 2.0, 3)


def test_backtrack_trials(abs_square):
    problem = abs_square.problem.fresh()
    y = np.array([2.0])
    state, x = backtrack(problem, y, BacktrackState(eta=0.5, alpha=0.5, t=1.0 / problem.mu))
    assert state.trials == 1
    assert x[0] == pytest.approx(solve_exact(build_model(problem, y, 0.25)).x_plus[0])
    t0 = 100.0 / problem.mu
    state, _ = backtrack(problem, y, BacktrackState(eta=0.5, alpha=0.5, t=t0))
    assert state.trials <= backtrack_trial_bound(t0, problem.mu, 0.5) == 8
    assert backtrack_trial_bound(0.1, 2.0, 0.5) == 1


class _FlatSquare(SmoothMap):
    """c(x) = x^2 on R whose derivative oracles report zero"""

    dim = 1
    beta = 2.0

    def eval(self, x):
        return np.asarray(x, dtype=float) ** 2

    def jvp(self, x, v):
        return np.zeros(1)

    def vjp(self, x, w):
        return np.zeros(1)


def test_backtrack_gives_up_on_inconsistent_oracle():
    problem = CompositeProblem(g=LinearFunction([-1.0]), h=LinearFunction([1.0]), c=_FlatSquare(),
                               name="flat_square").fresh()
    state = BacktrackState(eta=0.5, alpha=0.5, t=1.0 / problem.mu)
    with pytest.raises(BudgetExhausted):
        backtrack(problem, np.array([1.0]), state)
    assert problem.counters.n_c_eval <= 2 * (backtrack_trial_bound(state.t, problem.mu, 0.5) + 60) + 1


def test_backtracking_on_abs_square(abs_square):
    trace = run_accelerated_backtracking(abs_square.problem, abs_square.x0, abs_square.x0, 10.0, 0.5, 0.5, 10,
                                         info=CurvatureInfo(x_star=abs_square.x_star))
    for name in ("backtrack_trials", "mu_tilde_max", "mu_tilde_monotone"):
        assert trace.checks_named(name), name
    assert trace.all_checks_pass(), trace.failed_checks()
    assert trace.summary["mu_tilde_max"] == pytest.approx(max(1 / (0.5 * 10.0), 2.0 / 0.25))


def test_backtracking_on_lad_never_shrinks(lad_small):
    trace = run_accelerated_backtracking(lad_small.problem, lad_small.x0, lad_small.x0, 1.0, 0.5, 0.5, 10,
                                         info=lad_info(lad_small))
    assert all(r.inner_iters == 1 for r in trace.records)
    assert all(r.extra["mu_tilde"] == pytest.approx(2.0) for r in trace.records)
    assert trace.all_checks_pass(), trace.failed_checks()
    with pytest.raises(ValueError):
        run_accelerated_backtracking(lad_small.problem, lad_small.x0, lad_small.x0, 1.0, 1.5, 0.5, 3)


def test_three_point_property(phase_small, rng):
    problem = phase_small.problem.fresh()
    y = phase_small.x0
    v = y + 0.3 * rng.standard_normal(5)
    a = 0.5
    m = build_two_center(problem, y, v, 1.0 / (2 * problem.mu * a), a)
    z = solve_exact(m).x_plus
    for _ in range(20):
        w = z + rng.standard_normal(5)
        assert three_point_gap(m, z, w) <= 1e-5


def test_two_center_reduces_to_standard_model(phase_small):
    problem = phase_small.problem.fresh()
    y, t = phase_small.x0, 0.5 / problem.mu
    two = solve_exact(build_two_center(problem, y, y, t, 1.0)).x_plus
    one = solve_exact(build_model(problem, y, t)).x_plus
    np.testing.assert_allclose(two, one, atol=1e-10)
    with pytest.raises(ValueError):
        build_two_center(problem, y, y, t, 0.0)


def test_two_center_additive_composite_ignores_alpha(rng):
    instance = make_additive_composite(d=5, seed=3)
    problem = instance.problem.fresh()
    y, v, t = instance.x0, instance.x0 + rng.standard_normal(5), 0.05
    low = solve_exact(build_two_center(problem, y, v, t, 0.3)).x_plus
    high = solve_exact(build_two_center(problem, y, v, t, 0.9)).x_plus
    np.testing.assert_allclose(low, high, atol=1e-6)


def test_two_center_against_grid(grid_argmin):
    A = np.array([[1.0, 2.0], [-1.0, 0.5], [0.3, -1.5]])
    b = np.array([0.5, -1.0, 2.0])
    problem = CompositeProblem(g=BoxIndicator(-np.ones(2), np.ones(2)), h=L1Norm(3), c=AffineMap(A, b))
    y, v = np.array([0.5, -0.2]), np.array([-0.3, 0.4])
    m = build_two_center(problem, y, v, 0.7, 0.5)
    z = solve_exact(m).x_plus
    brute = grid_argmin(lambda w: model_value(m, w), np.zeros(2), 1.5)
    np.testing.assert_allclose(z, brute, atol=1e-4)
    assert model_value(m, z) <= model_value(m, brute) + 1e-9
    assert objective_value(problem.fresh(), z) < np.inf
