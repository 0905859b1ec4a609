"""Variance-reduced unlearning: the estimator, its noise schedules, and the full run.

Starting from the optimum theta_star of the full dataset, the unlearner runs
projected SGD on the estimator

    g(theta, xi_r) = grad(theta, xi_r) - grad(theta_star, xi_r)
                     - ratio * forget_term,        ratio = r_f / (1 - r_f)

whose expectation over the retain set equals the retain gradient: the two
anchored terms have, by stationarity of theta_star, a mean that cancels
exactly.  Because both retain terms share the sample, the estimator has
vanishing variance at the anchor and stays small inside the projection ball,
so the iterates track the retain optimum closely; Gaussian noise scaled to
the residual distance then delivers the (epsilon, delta) indistinguishability
guarantee.

Two variants are provided.  The default ("empirical") computes one full-batch
forget gradient at theta_star before the loop; the "theoretical" variant
re-samples a forget batch at every step.  Both build the projection radius and
the noise scale from ||forget_grad_at_star|| rather than a global Lipschitz
constant, which is intractable to certify for most losses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DataSplit
from .engines import BudgetMeter, PsgdResult, StepSchedule, project_ball, psgd
from .errors import ConfigError
from .rng import RngStream


def kappa_dp(epsilon: float, delta: float) -> float:
    """Privacy multiplier sqrt(2 * ln(2.5 / delta)) / epsilon.

    Converts a sensitivity bound into the Gaussian noise scale achieving
    (epsilon, delta) indistinguishability.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(2.0 * math.log(2.5 / delta)) / epsilon


def h_of(T: int, delta: float) -> float:
    """High-probability inflation factor 1 + 624 * (max(ln ln T, 0) + ln(2/delta)).

    The ln ln T term is clamped at zero below T = e^e so the factor stays >= 1.
    """
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 1.0 + 624.0 * (max(math.log(math.log(T)), 0.0) + math.log(2.0 / delta))


@dataclass(frozen=True)
class PrivacyBudget:
    """(epsilon, delta) pair with the derived noise multiplier kappa.

    For empirical runs kappa may be set directly, with delta kept only for the
    high-probability factor in the distance schedule.
    """

    kappa: float
    delta: float
    epsilon: float | None = None

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @classmethod
    def from_eps_delta(cls, epsilon: float, delta: float) -> "PrivacyBudget":
        return cls(kappa=kappa_dp(epsilon, delta), delta=delta, epsilon=epsilon)

    @classmethod
    def direct(cls, kappa: float, delta: float = 0.05) -> "PrivacyBudget":
        return cls(kappa=kappa, delta=delta)


@dataclass(frozen=True)
class VruSchedule:
    """Derived run constants: step count, distance bound nu_T, and projection radius."""

    T: int
    h_T: float
    nu_T: float
    radius: float
    ratio: float

    @classmethod
    def build(
        cls,
        T: int,
        delta: float,
        forget_grad_norm: float,
        mu: float,
        kappa_l: float,
        ratio: float,
        nu_t_override: float | None = None,
    ) -> "VruSchedule":
        # nu_T needs T >= 2; shorter runs are floored there so the noise
        # scale stays finite (T = 0 still noises the unmodified start).
        t_eff = max(T, 2)
        h = h_of(t_eff, delta)
        nu = (
            nu_t_override
            if nu_t_override is not None
            else math.sqrt(2.0 * h) * forget_grad_norm * (1.0 + kappa_l) / (mu * math.sqrt(t_eff))
        )
        radius = ratio * forget_grad_norm / mu
        if not (np.isfinite(nu) and np.isfinite(radius)) or nu < 0 or radius < 0:
            raise ConfigError(f"degenerate schedule: nu_T={nu}, radius={radius}")
        return cls(T=T, h_T=h, nu_T=nu, radius=radius, ratio=ratio)

    def noise_sigma(self, kappa: float) -> float:
        """Per-coordinate Gaussian noise scale ratio * nu_T * kappa."""
        return self.ratio * self.nu_T * kappa


@dataclass
class VruResult:
    pre_noise: np.ndarray
    post_noise: np.ndarray
    noise_sigma: float
    budget_used: int
    truncated: bool
    schedule: VruSchedule
    forget_grad_norm: float


def vru_gradient(
    spec,
    theta: np.ndarray,
    theta_star: np.ndarray,
    X_r: np.ndarray,
    y_r: np.ndarray,
    forget_term: np.ndarray,
    ratio: float,
) -> np.ndarray:
    """The variance-reduced estimator on one retain batch.

    ``forget_term`` is the forget-set gradient at theta_star: the anchored
    full batch in empirical mode, or a per-step stochastic batch otherwise.
    """
    if theta.shape != theta_star.shape or forget_term.shape != theta.shape:
        raise ConfigError("parameter/forget-term dimension mismatch")
    return (
        spec.batch_grad(theta, X_r, y_r)
        - spec.batch_grad(theta_star, X_r, y_r)
        - ratio * forget_term
    )


def noise_model(theta: np.ndarray, sigma: float, rng: RngStream) -> np.ndarray:
    """Add isotropic Gaussian noise with per-coordinate scale sigma.

    Exposed separately from the optimization so several noise levels can be
    simulated a posteriori from one pre-noise model.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    gen = rng.generator()
    return theta + sigma * gen.standard_normal(theta.shape)


def steps_for_budget(budget: int, n_forget: int, batch_size: int, mode: str) -> int:
    """Sample-gradient budget to step count under the mode's per-step cost."""
    if mode == "empirical":
        if budget < n_forget:
            raise ValueError(f"budget {budget} below the anchor cost {n_forget}")
        return (budget - n_forget) // (2 * batch_size)
    return budget // (3 * batch_size)


def vru_run(
    spec,
    split: DataSplit,
    theta_star: np.ndarray,
    privacy: PrivacyBudget,
    rng: RngStream,
    T: int | None = None,
    budget: int | None = None,
    mode: str = "empirical",
    projection: bool = True,
    schedule: StepSchedule | None = None,
    batch_size: int = 8,
    nu_t_override: float | None = None,
    meter: BudgetMeter | None = None,
    iterate_log: list | None = None,
) -> VruResult:
    """Run the full unlearning pipeline: projected SGD on the estimator, then noise.

    Exactly one of ``T`` (step count) or ``budget`` (sample-gradient units)
    must be given.  Cost accounting: two retain sample-gradients per step
    (the theta_t and theta_star evaluations), plus the one-time anchor cost
    |forget| in empirical mode or one forget gradient per sample per step in
    theoretical mode.

    Randomness: the optimization loop consumes ``rng.derive(0)`` (one index
    batch per step, plus one forget batch per step in theoretical mode, in
    that order) and the final noise draw consumes ``rng.derive(1)``.
    """
    if mode not in ("empirical", "theoretical"):
        raise ConfigError(f"unknown mode {mode!r}")
    if (T is None) == (budget is None):
        raise ValueError("pass exactly one of T or budget")
    retain, forget = split.retain, split.forget
    ratio = split.ratio
    n_r, n_f = retain.n, forget.n

    if budget is not None:
        T = steps_for_budget(budget, n_f, batch_size, mode)
        meter = meter if meter is not None else BudgetMeter(budget)
    elif meter is None:
        step_cost = 2 * batch_size if mode == "empirical" else 3 * batch_size
        meter = BudgetMeter(n_f + T * step_cost)

    anchor_grad = spec.batch_grad(theta_star, forget.X, forget.y)
    forget_grad_norm = float(np.linalg.norm(anchor_grad))
    if mode == "empirical":
        meter.charge(n_f, tag="anchor")

    sched = VruSchedule.build(
        T=T,
        delta=privacy.delta,
        forget_grad_norm=forget_grad_norm,
        mu=spec.mu,
        kappa_l=spec.kappa_l,
        ratio=ratio,
        nu_t_override=nu_t_override,
    )
    step_schedule = schedule if schedule is not None else StepSchedule.inverse_mu(spec.mu)
    projector = (
        (lambda x: project_ball(x, theta_star, sched.radius)) if projection else None
    )

    def oracle(theta: np.ndarray, t: int, gen: np.random.Generator) -> np.ndarray:
        idx = gen.integers(0, n_r, size=batch_size)
        if mode == "empirical":
            forget_term = anchor_grad
        else:
            fidx = gen.integers(0, n_f, size=batch_size)
            forget_term = spec.batch_grad(theta_star, forget.X[fidx], forget.y[fidx])
        return vru_gradient(spec, theta, theta_star, retain.X[idx], retain.y[idx], forget_term, ratio)

    result: PsgdResult = psgd(
        oracle,
        theta_star,
        step_schedule,
        T,
        gen=rng.derive(0).generator(),
        projector=projector,
        meter=meter,
        step_cost=2 * batch_size if mode == "empirical" else 3 * batch_size,
        steps_per_epoch=max(1, math.ceil(n_r / batch_size)),
        step_tag="retain" if mode == "empirical" else "retain+forget",
        iterate_log=iterate_log,
    )

    sigma = sched.noise_sigma(privacy.kappa)
    post = noise_model(result.theta, sigma, rng.derive(1))
    return VruResult(
        pre_noise=result.theta,
        post_noise=post,
        noise_sigma=sigma,
        budget_used=meter.used,
        truncated=result.truncated,
        schedule=sched,
        forget_grad_norm=forget_grad_norm,
    )
