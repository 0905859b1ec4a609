from __future__ import annotations

import math

import numpy as np
import pytest

from unlearn_bench import (
    PrivacyBudget,
    RngStream,
    StepSchedule,
    h_of,
    kappa_dp,
    noise_model,
    vru_gradient,
    vru_run,
)
from unlearn_bench.vru import VruSchedule, steps_for_budget
from toys import QuadraticSpec


def test_kappa_unit_log_argument():
    # delta = 2.5/e makes ln(2.5/delta) = 1
    assert kappa_dp(1.0, 2.5 / math.e) == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_kappa_figure_setting():
    # frozen: sqrt(2 ln 50) for (eps=1, delta=0.05); back-solving eps recovers kappa=1
    assert kappa_dp(1.0, 0.05) == pytest.approx(2.797149622536537, abs=1e-14)
    assert kappa_dp(2.797149622536537, 0.05) == pytest.approx(1.0, abs=1e-14)


def test_kappa_domain():
    with pytest.raises(ValueError):
        kappa_dp(0.0, 0.05)
    with pytest.raises(ValueError):
        kappa_dp(1.0, 1.0)
    with pytest.raises(ValueError):
        kappa_dp(1.0, 0.0)


def test_h_of_frozen_values():
    assert h_of(16, 2 / math.e) == pytest.approx(1261.3436188958533, rel=1e-12)
    assert h_of(100, 0.05) == pytest.approx(3255.8208658712265, rel=1e-12)


def test_h_of_clamps_below_e_to_the_e():
    # ln ln 2 < 0 is clamped to zero
    assert h_of(2, 0.3) == pytest.approx(1.0 + 624.0 * math.log(2 / 0.3), rel=1e-12)


def test_h_of_domain():
    with pytest.raises(ValueError):
        h_of(1, 0.05)
    with pytest.raises(ValueError):
        h_of(10, 1.5)


def test_vru_gradient_at_anchor_is_forget_term(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    s = blobs_split
    fterm = blobs_spec.batch_grad(theta_star, s.forget.X, s.forget.y)
    g = vru_gradient(blobs_spec, theta_star, theta_star, s.retain.X[:8], s.retain.y[:8],
                     fterm, s.ratio)
    np.testing.assert_array_equal(g, -s.ratio * fterm)


def test_vru_gradient_scalar_quadratic_hand_case():
    # l(t, xi) = (t - xi)^2 / 2, theta* = 0, theta = 1, xi_r = 2, forget grad 3, ratio 1
    spec = QuadraticSpec(dim=1)
    g = vru_gradient(spec, np.array([1.0]), np.array([0.0]), np.array([[2.0]]), None,
                     np.array([3.0]), 1.0)
    assert g[0] == pytest.approx(-2.0, abs=1e-15)


def test_vru_gradient_unbiased_for_retain_gradient(blobs_spec, blobs_split, blobs_optima):
    # enumerating all retain samples: mean estimator = grad_r(theta) - grad_r(theta*)
    # - ratio * grad_f(theta*), which at an exact optimum is grad_r(theta)
    theta_star, _ = blobs_optima
    s = blobs_split
    fterm = blobs_spec.batch_grad(theta_star, s.forget.X, s.forget.y)
    gen = np.random.default_rng(0)
    theta = theta_star + 0.05 * gen.standard_normal(blobs_spec.dim)
    total = np.zeros(blobs_spec.dim)
    for i in range(s.retain.n):
        total += vru_gradient(blobs_spec, theta, theta_star,
                              s.retain.X[i:i+1], s.retain.y[i:i+1], fterm, s.ratio)
    mean = total / s.retain.n
    expected = blobs_spec.batch_grad(theta, s.retain.X, s.retain.y)
    assert np.linalg.norm(mean - expected) <= 1e-6


def test_zero_variance_at_anchor(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    s = blobs_split
    fterm = blobs_spec.batch_grad(theta_star, s.forget.X, s.forget.y)
    grads = [
        vru_gradient(blobs_spec, theta_star, theta_star,
                     s.retain.X[i:i+1], s.retain.y[i:i+1], fterm, s.ratio)
        for i in range(0, s.retain.n, 7)
    ]
    for g in grads[1:]:
        np.testing.assert_array_equal(g, grads[0])


def test_estimator_norm_bound_in_ball(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    s = blobs_split
    fterm = blobs_spec.batch_grad(theta_star, s.forget.X, s.forget.y)
    fnorm = np.linalg.norm(fterm)
    radius = s.ratio * fnorm / blobs_spec.mu
    bound = (1 + blobs_spec.kappa_l) * s.ratio * fnorm
    gen = np.random.default_rng(2)
    for _ in range(1000):
        u = gen.standard_normal(blobs_spec.dim)
        u *= radius * gen.random() ** (1 / blobs_spec.dim) / np.linalg.norm(u)
        i = int(gen.integers(s.retain.n))
        g = vru_gradient(blobs_spec, theta_star + u, theta_star,
                         s.retain.X[i:i+1], s.retain.y[i:i+1], fterm, s.ratio)
        assert np.linalg.norm(g) <= bound


def test_noise_model_zero_sigma():
    theta = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(noise_model(theta, 0.0, RngStream(0)), theta)


def test_noise_model_streams():
    theta = np.zeros(5)
    a = noise_model(theta, 1.0, RngStream(0).derive(1))
    b = noise_model(theta, 1.0, RngStream(0).derive(1))
    c = noise_model(theta, 1.0, RngStream(0).derive(2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_noise_model_monte_carlo_std():
    theta = np.zeros(16)
    draws = np.stack([
        noise_model(theta, 0.37, RngStream(5).derive(i)) for i in range(6250)
    ])  # 1e5 scalar draws pooled
    assert draws.std() == pytest.approx(0.37, rel=0.02)


def test_noise_negative_sigma_rejected():
    with pytest.raises(ValueError):
        noise_model(np.zeros(2), -0.1, RngStream(0))


def test_schedule_closed_form_scalings():
    base = VruSchedule.build(T=400, delta=0.05, forget_grad_norm=0.7, mu=0.1,
                             kappa_l=12.0, ratio=0.02)
    double_ratio = VruSchedule.build(T=400, delta=0.05, forget_grad_norm=0.7, mu=0.1,
                                     kappa_l=12.0, ratio=0.04)
    # sigma = ratio * nu_T * kappa is exactly linear in ratio and in kappa
    assert double_ratio.noise_sigma(1.0) == pytest.approx(2.0 * base.noise_sigma(1.0), rel=1e-15)
    assert base.noise_sigma(3.0) == pytest.approx(3.0 * base.noise_sigma(1.0), rel=1e-15)
    # nu_T carries the sqrt(h_T / T) dependence exactly
    quad_T = VruSchedule.build(T=1600, delta=0.05, forget_grad_norm=0.7, mu=0.1,
                               kappa_l=12.0, ratio=0.02)
    expected = base.nu_T * math.sqrt(h_of(1600, 0.05) / h_of(400, 0.05)) / 2.0
    assert quad_T.nu_T == pytest.approx(expected, rel=1e-12)
    # and the empirical closed form itself
    assert base.nu_T == pytest.approx(
        math.sqrt(2 * h_of(400, 0.05)) * 0.7 * 13.0 / (0.1 * 20.0), rel=1e-12)
    assert base.radius == pytest.approx(0.02 * 0.7 / 0.1, rel=1e-15)


def test_steps_for_budget_accounting():
    assert steps_for_budget(1000, 40, 8, "empirical") == (1000 - 40) // 16
    assert steps_for_budget(1000, 40, 8, "theoretical") == 1000 // 24
    with pytest.raises(ValueError, match="anchor"):
        steps_for_budget(30, 40, 8, "empirical")


def test_vru_run_zero_steps(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(1.0, 0.05)
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(3), T=0)
    np.testing.assert_array_equal(res.pre_noise, theta_star)
    assert res.noise_sigma > 0
    assert not np.array_equal(res.post_noise, res.pre_noise)


def test_vru_run_zero_kappa_no_noise(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(0.0, 0.05)
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(3), T=50)
    np.testing.assert_array_equal(res.post_noise, res.pre_noise)
    assert res.noise_sigma == 0.0


def test_vru_run_deterministic(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(0.5, 0.05)
    a = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(9), T=200)
    b = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(9), T=200)
    assert np.array_equal(a.pre_noise, b.pre_noise)
    assert np.array_equal(a.post_noise, b.post_noise)


def test_vru_run_iterates_contained(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(1.0, 0.05)
    log: list = []
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(4), T=300,
                  iterate_log=log)
    radius = res.schedule.radius
    for it in log:
        assert np.linalg.norm(it - theta_star) <= radius * (1 + 1e-12)


def test_vru_run_budget_accounting(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(1.0, 0.05)
    n_f = blobs_split.forget.n
    budget = 2000
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(4), budget=budget)
    expected_T = (budget - n_f) // 16
    assert res.schedule.T == expected_T
    assert res.budget_used == n_f + 16 * expected_T <= budget


def test_vru_run_theoretical_mode(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(1.0, 0.05)
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(4), budget=2400,
                  mode="theoretical")
    assert res.schedule.T == 2400 // 24
    assert res.budget_used == 24 * res.schedule.T


def test_vru_run_nu_override(blobs_spec, blobs_split, blobs_optima):
    theta_star, _ = blobs_optima
    pb = PrivacyBudget.direct(0.1, 0.05)
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(4), T=100,
                  nu_t_override=1.0)
    assert res.noise_sigma == pytest.approx(blobs_split.ratio * 0.1, rel=1e-15)


def test_vru_improves_over_start(blobs_spec, blobs_split, blobs_optima):
    # the optimization phase moves the model toward the retain optimum
    theta_star, theta_r = blobs_optima
    pb = PrivacyBudget.direct(1.0, 0.05)
    res = vru_run(blobs_spec, blobs_split, theta_star, pb, RngStream(6),
                  budget=10 * blobs_split.n_train)
    start = np.linalg.norm(theta_star - theta_r)
    assert np.linalg.norm(res.pre_noise - theta_r) < 0.2 * start
