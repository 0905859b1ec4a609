"""Comparison unlearning methods: Fine-Tune, NFT, NegGrad+, and SCRUB.

All four run on the shared engines and budget meter, so their sample-gradient
spend is directly comparable to the variance-reduced unlearner.  Alternating
methods interleave one forget pass per retain epoch (batches of 8 on both
sets) and always conclude with a retain-descent step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import DataSplit
from .engines import BudgetMeter, StepSchedule, _epoch_batches, sgd_from
from .errors import ConfigError
from .rng import RngStream
from .vru import PrivacyBudget, noise_model

ASCENT_METHODS = ("neggrad_plus", "scrub")


@dataclass(frozen=True)
class BaselineConfig:
    """Hyperparameters for one baseline method."""

    method: str
    lr: float
    lr_decay: float = 1.0
    alpha: float | None = None  # ascent weight, NegGrad+/SCRUB only
    sensitivity: float | None = None  # NFT only

    def __post_init__(self) -> None:
        if self.method not in ("nft", "fine_tune", "neggrad_plus", "scrub"):
            raise ConfigError(f"unknown baseline method {self.method!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.method in ASCENT_METHODS:
            if self.alpha is None or self.alpha < 0:
                raise ConfigError(f"{self.method} requires a non-negative ascent weight alpha")
        elif self.alpha is not None:
            raise ConfigError(f"{self.method} does not take an ascent weight")

    @property
    def schedule(self) -> StepSchedule:
        return StepSchedule.constant_decay(self.lr, self.lr_decay)


def fine_tune(
    spec,
    split: DataSplit,
    theta_start: np.ndarray,
    budget: int,
    cfg: BaselineConfig,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Plain SGD on the retain set from theta_start, lr decayed once per epoch."""
    return sgd_from(
        spec,
        split.retain,
        theta_start,
        budget,
        cfg.schedule,
        rng,
        batch_size=batch_size,
        meter=meter,
        step_log=step_log,
    )


def nft(
    spec,
    split: DataSplit,
    theta_star: np.ndarray,
    budget: int,
    privacy: PrivacyBudget,
    cfg: BaselineConfig,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Noise then fine-tune.

    Gaussian noise of scale kappa * sensitivity is applied at theta_star (the
    noise draw itself is free of gradient cost), then the whole budget goes to
    retain fine-tuning.  Noise uses ``rng.derive(0)``, the SGD phase
    ``rng.derive(1)``.
    """
    if cfg.sensitivity is None:
        raise ConfigError("nft requires a measured or bounded sensitivity")
    sigma = privacy.kappa * cfg.sensitivity
    theta0 = noise_model(theta_star, sigma, rng.derive(0))
    return fine_tune(
        spec, split, theta0, budget, cfg, rng.derive(1),
        batch_size=batch_size, meter=meter, step_log=step_log,
    )


def _alternating(
    split: DataSplit,
    budget: int,
    rng: RngStream,
    batch_size: int,
    ascent_step: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    descent_step: Callable[[np.ndarray, np.ndarray, float], np.ndarray],
    theta: np.ndarray,
    schedule: StepSchedule,
    meter: BudgetMeter | None,
    step_log: list | None,
) -> np.ndarray:
    """Shared ascent/descent loop: one forget pass interleaved per retain epoch.

    An ascent batch is only taken when the following descent batch still fits
    the budget, which guarantees the run ends on retain descent.  Retain
    shuffles come from ``rng.derive(0)``, forget shuffles from ``rng.derive(1)``.
    """
    meter = meter if meter is not None else BudgetMeter(budget)
    theta = np.array(theta, dtype=np.float64)
    rgen = rng.derive(0).generator()
    fgen = rng.derive(1).generator()
    n_r, n_f = split.retain.n, split.forget.n
    epoch = 0
    t = 0
    while meter.can_spend(min(batch_size, n_r)):
        ascent_batches = list(_epoch_batches(n_f, batch_size, fgen))
        a = 0
        for d_idx in _epoch_batches(n_r, batch_size, rgen):
            if a < len(ascent_batches):
                a_idx = ascent_batches[a]
                if meter.can_spend(len(a_idx) + len(d_idx)):
                    a += 1
                    t += 1
                    lr = schedule.step(t, epoch)
                    meter.charge(len(a_idx), tag="forget")
                    theta = ascent_step(theta, a_idx, lr)
                    if step_log is not None:
                        step_log.append(("ascent", len(a_idx), lr))
            if not meter.can_spend(len(d_idx)):
                return theta
            t += 1
            lr = schedule.step(t, epoch)
            meter.charge(len(d_idx), tag="retain")
            theta = descent_step(theta, d_idx, lr)
            if step_log is not None:
                step_log.append(("descent", len(d_idx), lr))
        epoch += 1
    return theta


def neggrad_plus(
    spec,
    split: DataSplit,
    theta_start: np.ndarray,
    budget: int,
    cfg: BaselineConfig,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Alternate gradient ascent on forget batches with descent on retain batches."""
    retain, forget = split.retain, split.forget

    def ascent(theta, idx, lr):
        return theta + lr * cfg.alpha * spec.batch_grad(theta, forget.X[idx], forget.y[idx])

    def descent(theta, idx, lr):
        return theta - lr * spec.batch_grad(theta, retain.X[idx], retain.y[idx])

    return _alternating(
        split, budget, rng, batch_size, ascent, descent,
        theta_start, cfg.schedule, meter, step_log,
    )


def kl_divergence(spec, theta_teacher: np.ndarray, theta_student: np.ndarray, X: np.ndarray) -> float:
    """Mean KL(teacher || student) between softmax predictions over a batch."""
    logp_t = spec.predict_log_proba(theta_teacher, X)
    logp_s = spec.predict_log_proba(theta_student, X)
    p_t = np.exp(logp_t)
    return float((p_t * (logp_t - logp_s)).sum(axis=1).mean())


def kl_grad(spec, theta_teacher: np.ndarray, theta_student: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Gradient of mean KL(teacher || student) with respect to the student.

    In logit space this is p_student - p_teacher, mapped back through the
    bias-augmented features; the regularizer plays no part here.
    """
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    p_t = spec.predict_proba(theta_teacher, X)
    p_s = spec.predict_proba(theta_student, X)
    return ((p_s - p_t).T @ Xa).reshape(-1) / X.shape[0]


def scrub(
    spec,
    split: DataSplit,
    theta_start: np.ndarray,
    budget: int,
    cfg: BaselineConfig,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Teacher-student unlearning.

    The frozen teacher is the starting model.  Max-steps ascend
    alpha * KL(teacher || student) on forget batches; min-steps descend
    KL(teacher || student) plus the regularized cross-entropy fidelity term on
    retain batches (both terms weighted 1).
    """
    retain, forget = split.retain, split.forget
    teacher = np.array(theta_start, dtype=np.float64)

    def ascent(theta, idx, lr):
        return theta + lr * cfg.alpha * kl_grad(spec, teacher, theta, forget.X[idx])

    def descent(theta, idx, lr):
        g = kl_grad(spec, teacher, theta, retain.X[idx]) + spec.batch_grad(
            theta, retain.X[idx], retain.y[idx]
        )
        return theta - lr * g

    return _alternating(
        split, budget, rng, batch_size, ascent, descent,
        theta_start, cfg.schedule, meter, step_log,
    )


def measure_sensitivity(
    pre_noise_fn: Callable[[RngStream], np.ndarray],
    theta_r_star: np.ndarray,
    n_probes: int,
    rng: RngStream,
) -> float:
    """Empirical sensitivity: worst observed distance to the retain optimum.

    Runs the method's pre-noise pipeline under n_probes derived streams and
    returns max_i ||pre_noise_i - theta_r_star||.  This is the quantity the
    Gaussian mechanism must mask; deterministic pipelines yield identical
    probes, and the estimate is monotone in n_probes for nested seed sets.
    """
    if n_probes < 2:
        raise ValueError(f"need at least 2 probes, got {n_probes}")
    return max(
        float(np.linalg.norm(pre_noise_fn(rng.derive(i)) - theta_r_star))
        for i in range(n_probes)
    )
