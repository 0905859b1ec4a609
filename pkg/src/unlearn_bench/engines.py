"""Optimization engines metered in sample-gradient units.

All engines share three conventions:

* cost accounting: one unit = one per-sample gradient evaluation, charged to
  a :class:`BudgetMeter` before the step runs; a step is only taken if it
  fits, so the spend never exceeds the limit;
* epochs: stochastic engines shuffle without replacement and decay the
  learning rate after each full pass; the projected-SGD loop samples with
  replacement (matching its analysis) and decays on pass-equivalents;
* determinism: every random draw comes from an :class:`RngStream`, so a
  (seed, config) pair pins the whole trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .rng import RngStream


@dataclass
class BudgetMeter:
    """Monotone counter of sample-gradient evaluations against a limit."""

    limit: int
    used: int = 0
    by_tag: dict[str, int] = field(default_factory=dict)

    def can_spend(self, cost: int) -> bool:
        return self.used + cost <= self.limit

    def charge(self, cost: int, tag: str = "step") -> None:
        if cost < 0:
            raise ValueError("cost must be non-negative")
        self.used += cost
        self.by_tag[tag] = self.by_tag.get(tag, 0) + cost

    @property
    def remaining(self) -> int:
        return self.limit - self.used


@dataclass(frozen=True)
class StepSchedule:
    """Learning-rate schedule: either 1/(mu*t) or a constant rate with per-epoch decay."""

    kind: str  # "inverse-mu-t" | "constant-with-decay"
    base_lr: float
    decay: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("inverse-mu-t", "constant-with-decay"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    @classmethod
    def inverse_mu(cls, mu: float) -> "StepSchedule":
        return cls(kind="inverse-mu-t", base_lr=1.0 / mu)

    @classmethod
    def constant_decay(cls, lr: float, decay: float = 1.0) -> "StepSchedule":
        return cls(kind="constant-with-decay", base_lr=lr, decay=decay)

    def step(self, t: int, epoch: int = 0) -> float:
        """Step size at 1-based step index t, within the given 0-based epoch."""
        if t < 1:
            raise ValueError("step index starts at 1")
        if self.kind == "inverse-mu-t":
            return self.base_lr / t
        return self.base_lr * self.decay**epoch


def project_ball(x: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the closed ball B(center, radius)."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if x.shape != center.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {center.shape}")
    delta = x - center
    dist = float(np.linalg.norm(delta))
    if dist <= radius:
        return x
    return center + (radius / dist) * delta


@dataclass
class PsgdResult:
    theta: np.ndarray
    steps: int
    truncated: bool


def psgd(
    oracle: Callable[[np.ndarray, int, np.random.Generator], np.ndarray],
    start: np.ndarray,
    schedule: StepSchedule,
    steps: int,
    gen: np.random.Generator,
    projector: Callable[[np.ndarray], np.ndarray] | None = None,
    meter: BudgetMeter | None = None,
    step_cost: int = 1,
    steps_per_epoch: int | None = None,
    step_tag: str = "step",
    iterate_log: list | None = None,
) -> PsgdResult:
    """Projected stochastic gradient descent.

    theta_{t+1} = projector(theta_t - step(t) * oracle(theta_t, t, gen)),
    for t = 1..steps.  Each step charges ``step_cost`` to the meter; if the
    next step no longer fits the run stops early and is flagged truncated.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    theta = np.array(start, dtype=np.float64)
    done = 0
    for t in range(1, steps + 1):
        if meter is not None:
            if not meter.can_spend(step_cost):
                return PsgdResult(theta, done, truncated=True)
            meter.charge(step_cost, tag=step_tag)
        epoch = (t - 1) // steps_per_epoch if steps_per_epoch else 0
        g = oracle(theta, t, gen)
        theta = theta - schedule.step(t, epoch) * g
        if projector is not None:
            theta = projector(theta)
        if not np.all(np.isfinite(theta)):
            raise FloatingPointError(f"non-finite iterate at step {t}")
        if iterate_log is not None:
            iterate_log.append(theta.copy())
        done = t
    return PsgdResult(theta, done, truncated=False)


def _epoch_batches(n: int, batch_size: int, gen: np.random.Generator):
    """Shuffled index batches covering [0, n) once; the last batch may be partial."""
    order = gen.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size]


def sgd_from(
    spec,
    data: Dataset,
    theta0: np.ndarray,
    budget: int,
    schedule: StepSchedule,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Mini-batch SGD over shuffled epochs from an arbitrary start.

    Spends exactly one unit per sample visited; stops before any step that
    would exceed the budget.
    """
    meter = meter if meter is not None else BudgetMeter(budget)
    theta = np.array(theta0, dtype=np.float64)
    gen = rng.generator()
    t = 0
    epoch = 0
    while meter.can_spend(min(batch_size, data.n)):
        for idx in _epoch_batches(data.n, batch_size, gen):
            if not meter.can_spend(len(idx)):
                return theta
            meter.charge(len(idx), tag="retain")
            t += 1
            lr = schedule.step(t, epoch)
            theta = theta - lr * spec.batch_grad(theta, data.X[idx], data.y[idx])
            if step_log is not None:
                step_log.append(("descent", len(idx), lr))
        epoch += 1
    return theta


def retrain_sgd(
    spec,
    retain: Dataset,
    budget: int,
    schedule: StepSchedule,
    rng: RngStream,
    batch_size: int = 8,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """SGD retraining baseline from the fixed zero initialization."""
    return sgd_from(
        spec,
        retain,
        np.zeros(spec.dim),
        budget,
        schedule,
        rng,
        batch_size=batch_size,
        meter=meter,
        step_log=step_log,
    )


def retrain_gd(
    spec,
    retain: Dataset,
    budget: int,
    schedule: StepSchedule,
    rng: RngStream | None = None,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Full-batch gradient descent from zero; each step costs |retain| units."""
    meter = meter if meter is not None else BudgetMeter(budget)
    theta = np.zeros(spec.dim)
    t = 0
    while meter.can_spend(retain.n):
        meter.charge(retain.n, tag="retain")
        t += 1
        lr = schedule.step(t, t - 1)  # one full-batch step per epoch
        theta = theta - lr * spec.batch_grad(theta, retain.X, retain.y)
        if step_log is not None:
            step_log.append(("descent", retain.n, lr))
    return theta


def retrain_svrg(
    spec,
    retain: Dataset,
    budget: int,
    schedule: StepSchedule,
    rng: RngStream,
    meter: BudgetMeter | None = None,
    step_log: list | None = None,
) -> np.ndarray:
    """Anchored variance-reduced retraining from zero.

    Each outer cycle recomputes the full-batch anchor gradient (|retain|
    units) and runs |retain| single-sample inner steps using
    grad(theta, xi) - grad(anchor, xi) + anchor_grad, two units apiece, so a
    full cycle costs exactly 3 * |retain|.
    """
    n = retain.n
    if budget < 2 * n:
        raise ValueError(f"budget {budget} below one anchor pass plus one inner epoch ({2 * n})")
    meter = meter if meter is not None else BudgetMeter(budget)
    gen = rng.generator()
    theta = np.zeros(spec.dim)
    X, y = retain.X, retain.y
    t = 0
    cycle = 0
    while meter.can_spend(n):
        meter.charge(n, tag="anchor")
        anchor = theta.copy()
        anchor_grad = spec.batch_grad(anchor, X, y)
        for _ in range(n):
            if not meter.can_spend(2):
                return theta
            meter.charge(2, tag="retain")
            t += 1
            i = int(gen.integers(n))
            xi, yi = X[i : i + 1], y[i : i + 1]
            g = spec.batch_grad(theta, xi, yi) - spec.batch_grad(anchor, xi, yi) + anchor_grad
            lr = schedule.step(t, cycle)
            theta = theta - lr * g
            if step_log is not None:
                step_log.append(("descent", 1, lr))
        cycle += 1
    return theta
