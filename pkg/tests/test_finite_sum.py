import numpy as np
import pytest

from core_engine import objective_value
from data_models import FiniteSumMode, OracleCounters, ProxLinearConfig, SvrgConfig
from errors import DimensionMismatch
from finite_sum import (FiniteSumInstance, FiniteSumProblem, KatyushaSlot, StackedMap, SvrgMethod,
                        aggregate_constants, as_composite, finite_sum_smoothing_nu, finite_sum_total_cost,
                        katyusha_constants, prox_svrg_run, run_finite_sum_driver, smoothed_components,
                        subproblem_instance, svrg_index_stream)
from problems import make_phase_retrieval, phase_retrieval_finite_sum, phase_retrieval_from_data
from prox_linear import run_coupled, wrap_plus
from prox_toolbox import L1Norm, MoreauEnvelope, QuadraticShift, ScaledFunction, SquaredL2, ZeroFunction
from subproblem import build_model, reference_step


@pytest.fixture
def phase_fs():
    return make_phase_retrieval(d=5, m=10, seed=0, finite_sum=True)


def least_squares_instance(m, d, seed):
    """(1/2m) |G z - y|^2 + |z - c|^2 / 2 with unit rows, so ell = alpha = 1"""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((m, d))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    y = rng.standard_normal(m)
    c = rng.standard_normal(d)
    inst = FiniteSumInstance(h_components=[SquaredL2(1.0) for _ in range(m)], offsets=-y, grads=G,
                             center=np.zeros(d), p=QuadraticShift(ZeroFunction(), c, 1.0), ell=1.0)
    x_star = np.linalg.solve(G.T @ G / m + np.eye(d), G.T @ y / m + c)
    return inst, x_star


def test_single_component_matches_composite(rng):
    A = rng.standard_normal((1, 4))
    b = np.array([0.7])
    fs = phase_retrieval_finite_sum(A, b)
    single = phase_retrieval_from_data(A, b)
    aggregate = as_composite(fs)
    assert aggregate.L == pytest.approx(single.L)
    assert aggregate.beta == pytest.approx(single.beta)
    for _ in range(5):
        x = rng.standard_normal(4)
        assert objective_value(aggregate.fresh(), x) == pytest.approx(objective_value(single.fresh(), x))


def test_aggregate_matches_averaged_objective(phase_fs, rng):
    fs = phase_fs.problem
    A, b = phase_fs.extra["A"], phase_fs.extra["b"]
    aggregate = as_composite(fs)
    assert aggregate.mu == pytest.approx(fs.mu)
    consts = aggregate_constants(fs)
    assert consts["L"] == pytest.approx(fs.L / np.sqrt(10))
    assert consts["beta"] == pytest.approx(fs.beta * np.sqrt(10))
    x = rng.standard_normal(5)
    assert objective_value(aggregate.fresh(), x) == pytest.approx(np.mean(np.abs((A @ x) ** 2 - b)))


def test_aggregate_h_prox_and_lipschitz(phase_fs, rng):
    h = as_composite(phase_fs.problem).h
    z = rng.standard_normal(10)
    t = 0.7
    expected = np.sign(z) * np.maximum(np.abs(z) - t / 10, 0.0)
    np.testing.assert_allclose(h.prox(t, z), expected, atol=1e-15)
    ones = np.ones(10)
    assert h.value(2 * ones) - h.value(ones) == pytest.approx(h.lipschitz * np.linalg.norm(ones))
    for _ in range(20):
        u, w = rng.standard_normal(10), rng.standard_normal(10)
        assert abs(h.value(u) - h.value(w)) <= h.lipschitz * np.linalg.norm(u - w) + 1e-12


def test_component_count_mismatch():
    with pytest.raises(DimensionMismatch):
        FiniteSumProblem(h_components=[L1Norm(1)], c_components=[], g=ZeroFunction())


def test_smoothed_components(phase_fs):
    fs = phase_fs.problem
    nu = finite_sum_smoothing_nu(fs, 0.1)
    assert nu == pytest.approx(10 * 0.01 / (2 * fs.L ** 3 * fs.beta))
    smooth = smoothed_components(fs, nu)
    assert smooth.L_h == pytest.approx(10 / nu)
    assert smooth.L == pytest.approx(fs.L)
    with pytest.raises(ValueError):
        smoothed_components(fs, 0.0)


def test_subproblem_instance(phase_fs):
    fs = smoothed_components(phase_fs.problem, 0.05)
    problem = as_composite(fs).fresh()
    x, t = phase_fs.x0, 0.1
    model = build_model(problem, x, t)
    inst = subproblem_instance(fs, model)
    A = phase_fs.extra["A"]
    grads = 2.0 * (A @ x)[:, None] * A
    assert inst.ell == pytest.approx(fs.L_h * np.max(np.sum(grads ** 2, axis=1)))
    assert inst.alpha == pytest.approx(1.0 / t)
    assert inst.value(x) == pytest.approx(objective_value(as_composite(fs).fresh(), x), rel=1e-12)
    with pytest.raises(ValueError):
        subproblem_instance(phase_fs.problem, build_model(as_composite(phase_fs.problem).fresh(), x, t))


def test_svrg_single_step_is_prox_gradient():
    inst, _ = least_squares_instance(1, 3, seed=4)
    x0 = np.array([0.5, -1.0, 2.0])
    x, history = prox_svrg_run(inst, x0, SvrgConfig(eta=0.3, J=1))
    expected = inst.p.prox(0.3, x0 - 0.3 * inst.full_gradient(x0))
    np.testing.assert_allclose(x, expected, atol=1e-14)
    assert len(history) == 2


def test_variance_reduced_gradient_is_unbiased(rng):
    inst, _ = least_squares_instance(8, 4, seed=1)
    x, snapshot = rng.standard_normal(4), rng.standard_normal(4)
    full = inst.full_gradient(snapshot)
    estimates = [full + inst.component_gradient(i, x) - inst.component_gradient(i, snapshot) for i in range(8)]
    np.testing.assert_allclose(np.mean(estimates, axis=0), inst.full_gradient(x), atol=1e-12)


def test_svrg_epoch_cost():
    inst, _ = least_squares_instance(6, 3, seed=2)
    prox_svrg_run(inst, np.zeros(3), SvrgConfig(J=7, epochs=3))
    assert inst.counters.n_grad_component == 3 * (6 + 2 * 7)


def test_svrg_linear_rate_in_expectation():
    epochs = 3
    ratios = []
    for seed in range(20):
        inst, x_star = least_squares_instance(12, 4, seed=seed)
        x0 = np.zeros(4)
        gap0 = inst.value(x0) - inst.value(x_star)
        x, _ = prox_svrg_run(inst, x0, SvrgConfig(epochs=epochs, seed=seed))
        ratios.append((inst.value(x) - inst.value(x_star)) / gap0)
    assert min(ratios) >= -1e-12
    assert np.mean(ratios) <= 0.9 ** epochs


def test_index_stream_is_reproducible():
    a = svrg_index_stream(3, 1, 50, 10, stream=2)
    np.testing.assert_array_equal(a, svrg_index_stream(3, 1, 50, 10, stream=2))
    assert not np.array_equal(a, svrg_index_stream(3, 2, 50, 10, stream=2))
    assert a.min() >= 0 and a.max() < 10


def test_svrg_needs_strong_convexity():
    inst, _ = least_squares_instance(4, 2, seed=0)
    inst.p = ZeroFunction()
    with pytest.raises(ValueError):
        prox_svrg_run(inst, np.zeros(2), SvrgConfig())


def test_katyusha_slot(phase_fs):
    gamma, tau = katyusha_constants(10, 5.0)
    assert gamma == 4.0
    assert 0.0 < tau < 1.0
    fs = smoothed_components(phase_fs.problem, 0.05)
    model = build_model(as_composite(fs).fresh(), phase_fs.x0, 0.1)
    slot = KatyushaSlot(fs)
    _, tau_plus = slot.constants(model)
    assert 0.0 < tau_plus < 1.0
    with pytest.raises(NotImplementedError):
        slot.run(model, phase_fs.x0, 1)


def test_finite_sum_total_cost():
    cost = finite_sum_total_cost(10, 1.0, 2.0, 3.0, 1.0, 0.1)
    assert set(cost) == {"nu", "outer", "epochs_per_step", "epoch_cost", "total"}
    assert cost["total"] == cost["outer"] * cost["epochs_per_step"] * cost["epoch_cost"]


@pytest.mark.slow
def test_driver_is_reproducible(phase_fs):
    svrg = SvrgConfig(seed=3, inner_factor=1.0)
    runs = [run_finite_sum_driver(phase_fs.problem, phase_fs.x0, 0.5, mode=FiniteSumMode.SMOOTHED, svrg=svrg,
                                  max_outer=2) for _ in range(2)]
    (x1, trace1), (x2, trace2) = runs
    np.testing.assert_array_equal(x1, x2)
    assert len(trace1.records) <= 3
    assert trace1.summary["certified_prox_grad_norm"] == trace2.summary["certified_prox_grad_norm"]
    assert trace1.totals.n_grad_component > 0


def test_smooth_mode_needs_smooth_components(phase_fs):
    with pytest.raises(ValueError):
        run_finite_sum_driver(phase_fs.problem, phase_fs.x0, 0.5, mode=FiniteSumMode.SMOOTH)


@pytest.mark.parametrize("m", [1, 4, 25])
def test_aggregate_constants_bound_the_stack(m):
    rng = np.random.default_rng(m)
    A = rng.standard_normal((m, 3))
    b = rng.uniform(size=m)
    fs = phase_retrieval_finite_sum(A, b)
    agg = as_composite(fs)
    assert agg.mu == pytest.approx(fs.mu)
    for _ in range(20):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        Jx, Jy = agg.c.jacobian(x), agg.c.jacobian(y)
        assert np.linalg.norm(Jx - Jy, 2) <= agg.beta * np.linalg.norm(x - y) + 1e-10
        assert np.linalg.norm(Jx, 2) <= np.sqrt(m) * np.max(np.linalg.norm(Jx, axis=1)) + 1e-10
        u, w = rng.standard_normal(m), rng.standard_normal(m)
        assert abs(agg.h.value(u) - agg.h.value(w)) <= agg.L * np.linalg.norm(u - w) + 1e-12


def test_batched_stack_matches_component_loop(phase_fs, rng):
    fs = phase_fs.problem
    batched = as_composite(fs).c
    looped = StackedMap(fs.c_components, beta=batched.beta)
    x, v, w = rng.standard_normal(5), rng.standard_normal(5), rng.standard_normal(10)
    np.testing.assert_allclose(batched.eval(x), looped.eval(x), atol=1e-12)
    np.testing.assert_allclose(batched.jvp(x, v), looped.jvp(x, v), atol=1e-12)
    np.testing.assert_allclose(batched.vjp(x, w), looped.vjp(x, w), atol=1e-12)
    np.testing.assert_allclose(batched.rows(x), looped.rows(x), atol=1e-12)


def test_smoothed_component_is_scaled_envelope(phase_fs, rng):
    fs = phase_fs.problem
    nu = 0.05
    smooth = smoothed_components(fs, nu).h_components
    assert all(h is smooth[0] for h in smooth)
    nested = ScaledFunction(MoreauEnvelope(ScaledFunction(L1Norm(1), 1.0 / fs.m), nu), float(fs.m))
    for u in rng.standard_normal(8):
        z = np.array([u])
        assert smooth[0].value(z) == pytest.approx(nested.value(z), abs=1e-12)
        np.testing.assert_allclose(smooth[0].gradient(z), nested.gradient(z), atol=1e-12)
        np.testing.assert_allclose(smooth[0].prox(0.3, z), nested.prox(0.3, z), atol=1e-12)


def test_instance_batches_match_components(phase_fs, rng):
    fs = smoothed_components(phase_fs.problem, 0.05)
    inst = subproblem_instance(fs, build_model(as_composite(fs).fresh(), phase_fs.x0, 0.1))
    assert inst.shared_h is fs.h_components[0]
    z = phase_fs.x0 + 0.1 * rng.standard_normal(5)
    idx = np.array([3, 0, 3, 9])
    single = [inst.component_derivative(int(i), z) for i in idx]
    np.testing.assert_allclose(inst.derivatives(idx, z), single, atol=1e-12)
    looped = sum(inst.component_gradient(i, z) for i in range(10)) / 10
    np.testing.assert_allclose(inst.full_gradient(z), looped, atol=1e-10)


def test_aggregate_oracles_count_every_component(phase_fs):
    problem = as_composite(phase_fs.problem).fresh()
    x = phase_fs.x0
    objective_value(problem, x)
    problem.jvp(x, np.ones(5))
    problem.vjp(x, np.ones(10))
    problem.prox_h(0.1, np.ones(10))
    c = problem.counters
    assert (c.n_c_eval, c.n_jvp, c.n_vjp, c.n_prox_h) == (10, 10, 10, 10)


def test_jacobian_rows_count_as_vjp(phase_fs):
    fs = smoothed_components(phase_fs.problem, 0.05)
    problem = as_composite(fs).fresh()
    model = build_model(problem, phase_fs.x0, 0.1)
    before = problem.counters.copy()
    subproblem_instance(fs, model)
    spent = problem.counters.minus(before)
    assert spent.n_vjp == 10
    assert spent.basic_operations() == 10


def test_basic_operations_include_component_gradients():
    assert OracleCounters(n_c_eval=1, n_vjp=2, n_grad_component=7).basic_operations() == 10


@pytest.mark.slow
def test_coupled_descent_in_expectation(phase_fs):
    fs = smoothed_components(phase_fs.problem, finite_sum_smoothing_nu(phase_fs.problem, 0.5))
    problem = as_composite(fs)
    t = 1.0 / phase_fs.problem.mu
    G = reference_step(problem, phase_fs.x0, t)[1]
    decreases = []
    for seed in range(20):
        scheme = wrap_plus(SvrgMethod(fs, SvrgConfig(seed=seed, inner_factor=1.0)))
        trace = run_coupled(problem, phase_fs.x0, ProxLinearConfig(t=t, max_outer=1, subscheme=scheme))
        decreases.append(trace.records[0].extra["F_decrease"])
    assert np.mean(decreases) >= 0.25 * t * float(np.dot(G, G)) - 1e-9


@pytest.mark.slow
def test_driver_certifies_mean_prox_grad_over_seeds(phase_fs):
    eps = 0.5
    norms = []
    for seed in range(20):
        _, trace = run_finite_sum_driver(phase_fs.problem, phase_fs.x0, eps,
                                         svrg=SvrgConfig(seed=seed, inner_factor=1.0), max_outer=30)
        norms.append(trace.summary["certified_prox_grad_norm"])
    assert np.mean(norms) <= eps
