from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from unlearn_bench import (
    BudgetMeter,
    RngStream,
    StepSchedule,
    excess_risk,
    project_ball,
    psgd,
    retrain_gd,
    retrain_sgd,
    retrain_svrg,
    train_to_optimum,
)
from unlearn_bench.engines import sgd_from
from toys import QuadraticSpec, quadratic_dataset, quadratic_optimum

vectors = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_nan=False))


def test_project_inside_unchanged():
    x = np.array([0.1, 0.2])
    out = project_ball(x, np.zeros(2), 1.0)
    np.testing.assert_array_equal(out, x)


def test_project_radial_scaling():
    u = np.array([0.6, 0.8])
    out = project_ball(2.0 * u, np.zeros(2), 1.0)
    np.testing.assert_allclose(out, u, atol=1e-15)


def test_project_zero_radius():
    center = np.array([1.0, -2.0])
    np.testing.assert_array_equal(project_ball(np.array([3.0, 4.0]), center, 0.0), center)


def test_project_negative_radius_rejected():
    with pytest.raises(ValueError):
        project_ball(np.zeros(2), np.zeros(2), -1.0)


@given(vectors, vectors, st.floats(min_value=0, max_value=5, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_project_idempotent_and_contained(x, center, radius):
    once = project_ball(x, center, radius)
    twice = project_ball(once, center, radius)
    np.testing.assert_allclose(once, twice, atol=1e-12)
    assert np.linalg.norm(once - center) <= radius * (1 + 1e-12) + 1e-15


@given(vectors, vectors, vectors, st.floats(min_value=0, max_value=5, allow_nan=False))
@settings(max_examples=100, deadline=None)
def test_projection_is_1_lipschitz(x, y, center, radius):
    dx = np.linalg.norm(project_ball(x, center, radius) - project_ball(y, center, radius))
    assert dx <= np.linalg.norm(x - y) + 1e-12


def test_schedule_kinds():
    inv = StepSchedule.inverse_mu(0.5)
    assert inv.step(1) == 2.0 and inv.step(4) == 0.5
    dec = StepSchedule.constant_decay(1.0, 0.5)
    assert dec.step(1, epoch=0) == 1.0 and dec.step(99, epoch=3) == 0.125
    with pytest.raises(ValueError):
        inv.step(0)


def test_psgd_zero_steps_returns_start():
    start = np.array([1.0, 2.0])
    res = psgd(lambda th, t, g: th, start, StepSchedule.inverse_mu(1.0), 0,
               gen=RngStream(0).generator())
    np.testing.assert_array_equal(res.theta, start)
    assert res.steps == 0 and not res.truncated


def test_psgd_deterministic_bitwise():
    spec = QuadraticSpec(dim=2)
    X = np.random.default_rng(3).standard_normal((40, 2))

    def oracle(theta, t, gen):
        i = int(gen.integers(len(X)))
        return spec.batch_grad(theta, X[i : i + 1])

    runs = []
    for _ in range(2):
        log = []
        psgd(oracle, np.zeros(2), StepSchedule.inverse_mu(1.0), 500,
             gen=RngStream(11).generator(), iterate_log=log)
        runs.append(np.array(log))
    assert np.array_equal(runs[0], runs[1])


def test_psgd_quadratic_convergence_rate():
    # exact gradients, 1/(mu t) steps: distance after 1e4 steps beats 1e2 by >= 5x,
    # and the log-log regression slope over T in {1e2..1e5} is at most -0.8
    spec = QuadraticSpec(dim=2, lam=0.5)
    X = np.array([[2.0, -1.0], [0.5, 1.5], [1.0, 1.0]])
    opt = quadratic_optimum(spec, X)
    # anisotropy: scale one coordinate's pull via a fixed linear map of the gradient
    scale = np.array([1.0, 1.3])

    def oracle(theta, t, gen):
        return scale * spec.batch_grad(theta, X)

    dists = {}
    for T in (10**2, 10**3, 10**4, 10**5):
        res = psgd(oracle, np.array([5.0, -4.0]), StepSchedule.inverse_mu(spec.mu), T,
                   gen=RngStream(0).generator())
        dists[T] = np.linalg.norm(res.theta - opt)
    assert dists[10**4] <= dists[10**2] / 5.0
    logs_t = np.log([10**2, 10**3, 10**4, 10**5])
    logs_d = np.log([dists[10**2], dists[10**3], dists[10**4], dists[10**5]])
    slope = np.polyfit(logs_t, logs_d, 1)[0]
    assert slope <= -0.8


def test_psgd_meter_truncation_flag():
    meter = BudgetMeter(limit=5)
    res = psgd(lambda th, t, g: th, np.zeros(2), StepSchedule.inverse_mu(1.0), 10,
               gen=RngStream(0).generator(), meter=meter, step_cost=2)
    assert res.truncated and res.steps == 2 and meter.used == 4


def test_sgd_budget_one_epoch_exact(blobs, blobs_spec):
    retain = blobs.subset(np.arange(100))
    meter = BudgetMeter(retain.n)
    log = []
    retrain_sgd(blobs_spec, retain, retain.n, StepSchedule.constant_decay(0.1),
                RngStream(0), meter=meter, step_log=log)
    assert meter.used == retain.n
    assert len(log) == math.ceil(retain.n / 8)


def test_gd_budget_exact_steps(blobs, blobs_spec):
    retain = blobs.subset(np.arange(100))
    meter = BudgetMeter(10 * retain.n)
    log = []
    retrain_gd(blobs_spec, retain, 10 * retain.n, StepSchedule.constant_decay(0.1, 0.9),
               meter=meter, step_log=log)
    assert len(log) == 10
    assert meter.used == 10 * retain.n


def test_zero_budget_returns_zero_init(blobs, blobs_spec):
    theta = retrain_sgd(blobs_spec, blobs, 0, StepSchedule.constant_decay(0.1), RngStream(0))
    np.testing.assert_array_equal(theta, np.zeros(blobs_spec.dim))


def test_sgd_more_epochs_lower_excess(blobs, blobs_spec, blobs_split, blobs_optima):
    _, theta_r = blobs_optima
    retain, test = blobs_split.retain, blobs_split.test
    sched = StepSchedule.constant_decay(0.5, 0.9)
    one, ten = [], []
    for seed in range(10):
        t1 = retrain_sgd(blobs_spec, retain, retain.n, sched, RngStream(seed).derive(1))
        t10 = retrain_sgd(blobs_spec, retain, 10 * retain.n, sched, RngStream(seed).derive(1))
        one.append(excess_risk(blobs_spec, t1, test, theta_r))
        ten.append(excess_risk(blobs_spec, t10, test, theta_r))
    assert np.mean(ten) < np.mean(one)


def test_svrg_estimator_identities(blobs, blobs_spec):
    retain = blobs.subset(np.arange(60))
    gen = np.random.default_rng(0)
    anchor = gen.standard_normal(blobs_spec.dim)
    anchor_grad = blobs_spec.batch_grad(anchor, retain.X, retain.y)
    # at theta = anchor the per-sample difference cancels exactly
    i = 17
    g = (blobs_spec.batch_grad(anchor, retain.X[i:i+1], retain.y[i:i+1])
         - blobs_spec.batch_grad(anchor, retain.X[i:i+1], retain.y[i:i+1])
         + anchor_grad)
    np.testing.assert_array_equal(g, anchor_grad)
    # the estimator mean over all samples equals the full-batch gradient
    theta = gen.standard_normal(blobs_spec.dim)
    total = np.zeros(blobs_spec.dim)
    for i in range(retain.n):
        total += (blobs_spec.batch_grad(theta, retain.X[i:i+1], retain.y[i:i+1])
                  - blobs_spec.batch_grad(anchor, retain.X[i:i+1], retain.y[i:i+1])
                  + anchor_grad)
    np.testing.assert_allclose(total / retain.n,
                               blobs_spec.batch_grad(theta, retain.X, retain.y), atol=1e-12)


def test_svrg_budget_accounting(blobs, blobs_spec):
    retain = blobs.subset(np.arange(50))
    n = retain.n
    meter = BudgetMeter(3 * n)
    log = []
    retrain_svrg(blobs_spec, retain, 3 * n, StepSchedule.constant_decay(0.05, 0.5),
                 RngStream(0), meter=meter, step_log=log)
    # one outer cycle: one anchor pass plus n inner steps at 2 units each
    assert meter.used == 3 * n
    assert meter.by_tag == {"anchor": n, "retain": 2 * n}
    assert len(log) == n


def test_svrg_insufficient_budget_rejected(blobs, blobs_spec):
    retain = blobs.subset(np.arange(50))
    with pytest.raises(ValueError, match="anchor pass"):
        retrain_svrg(blobs_spec, retain, retain.n, StepSchedule.constant_decay(0.05),
                     RngStream(0))


def test_engines_deterministic_across_calls(blobs, blobs_spec):
    retain = blobs.subset(np.arange(120))
    sched = StepSchedule.constant_decay(0.3, 0.8)
    a = retrain_sgd(blobs_spec, retain, 5 * retain.n, sched, RngStream(21))
    b = retrain_sgd(blobs_spec, retain, 5 * retain.n, sched, RngStream(21))
    assert np.array_equal(a, b)
    c = retrain_svrg(blobs_spec, retain, 6 * retain.n, sched, RngStream(21))
    d = retrain_svrg(blobs_spec, retain, 6 * retain.n, sched, RngStream(21))
    assert np.array_equal(c, d)


def test_budget_never_exceeded_and_tight(blobs, blobs_spec):
    retain = blobs.subset(np.arange(97))  # awkward size: partial batches everywhere
    sched = StepSchedule.constant_decay(0.1, 0.9)
    for budget in (97, 200, 555, 970):
        m_sgd = BudgetMeter(budget)
        retrain_sgd(blobs_spec, retain, budget, sched, RngStream(1), meter=m_sgd)
        assert m_sgd.used <= budget
        assert budget - m_sgd.used < 8  # within one batch of the limit
        m_gd = BudgetMeter(budget)
        retrain_gd(blobs_spec, retain, budget, sched, meter=m_gd)
        assert m_gd.used <= budget
        assert budget - m_gd.used < retain.n  # within one full-batch step

