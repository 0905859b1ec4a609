"""U-LiRA membership-inference evaluation of unlearned models.

For each attacked sample the attack fits one Gaussian to its score under the
target shadows (trained on everything, then unlearned: the member hypothesis)
and one under the reference shadows (retrained from scratch on the retain
set: the nonmember hypothesis), then classifies the audited model's score by
likelihood.  Accuracy of 0.5 on a balanced attack set means the unlearned
model is indistinguishable from retraining.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import DataSplit, Dataset
from .rng import RngStream

SCORE_PROB_CLAMP = 1e-12
VARIANCE_FLOOR = 1e-12
MIN_STABLE_ATTACK_SIZE = 5


class UliraInstabilityWarning(UserWarning):
    """Attack sets below a handful of samples make the accuracy quantized and noisy."""


@dataclass(frozen=True)
class ShadowSet:
    """Models backing the two hypotheses: unlearned targets and retrained references."""

    targets: tuple[np.ndarray, ...]
    references: tuple[np.ndarray, ...]

    @property
    def count(self) -> int:
        return len(self.targets)

    def __post_init__(self) -> None:
        if len(self.targets) < 2 or len(self.references) < 2:
            raise ValueError("need at least 2 shadows per side")


@dataclass(frozen=True)
class AttackSet:
    """Balanced attack set: the forget samples and an equal number of test draws."""

    members: Dataset
    nonmembers: Dataset

    def __post_init__(self) -> None:
        if self.members.n != self.nonmembers.n:
            raise ValueError("attack set must be balanced")


@dataclass
class MiaReport:
    accuracy: float
    per_sample_scores: dict[str, tuple[float, float, float, float]]
    n_attacked: int

    def summary(self, method: str, r_f: float, seed: int) -> dict:
        """The JSON-serializable report fields."""
        return {
            "method": method,
            "r_f": r_f,
            "seed": seed,
            "accuracy": self.accuracy,
            "n_attacked": self.n_attacked,
        }


def score_from_prob(p_true: float | np.ndarray) -> np.ndarray:
    """Logit-scaled confidence ln(p) - ln(1 - p) with clamping away from {0, 1}."""
    p = np.clip(p_true, SCORE_PROB_CLAMP, 1.0 - SCORE_PROB_CLAMP)
    return np.log(p) - np.log1p(-p)


def mia_score(spec, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample attack statistic: the true-class confidence on the logit scale."""
    probs = spec.predict_proba(theta, X)
    return score_from_prob(probs[np.arange(len(y)), y])


def build_attack_set(split: DataSplit, rng: RngStream) -> AttackSet:
    """Forget samples as members; |forget| test samples (without replacement) as nonmembers."""
    n_f = split.forget.n
    if n_f > split.test.n:
        raise ValueError("test set too small to draw a balanced nonmember sample")
    if n_f < MIN_STABLE_ATTACK_SIZE:
        warnings.warn(
            f"attacking only {n_f} forget samples; accuracy will be unstable",
            UliraInstabilityWarning,
        )
    gen = rng.generator()
    idx = gen.choice(split.test.n, size=n_f, replace=False)
    return AttackSet(members=split.forget, nonmembers=split.test.subset(np.sort(idx)))


def build_shadows(
    unlearn_fn: Callable[[RngStream], np.ndarray],
    retrain_fn: Callable[[RngStream], np.ndarray],
    count: int,
    rng: RngStream,
) -> ShadowSet:
    """Train ``count`` target and reference shadows under distinct derived streams.

    ``unlearn_fn`` must embody the same method and configuration as the model
    being audited; ``retrain_fn`` trains from scratch on the retain set only.
    """
    if count < 2:
        raise ValueError(f"need at least 2 shadows per side, got {count}")
    targets = tuple(unlearn_fn(rng.derive(0, i)) for i in range(count))
    references = tuple(retrain_fn(rng.derive(1, i)) for i in range(count))
    return ShadowSet(targets=targets, references=references)


def lira_decisions(
    target_scores: np.ndarray,
    reference_scores: np.ndarray,
    audited_scores: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample likelihood decisions from raw score matrices.

    ``target_scores`` and ``reference_scores`` are (n_shadows, n_samples);
    a sample is called a member when its audited score is more likely under
    the Gaussian fitted to the target scores.  The two per-sample variances
    are pooled and floored, so the rule reduces to nearest-mean with ties
    resolved as nonmember.  Returns (is_member, member_mean, nonmember_mean,
    pooled_std).
    """
    if target_scores.shape[0] < 2 or reference_scores.shape[0] < 2:
        raise ValueError("need at least 2 shadows per side")
    m_t = target_scores.mean(axis=0)
    m_r = reference_scores.mean(axis=0)
    pooled_var = 0.5 * (target_scores.var(axis=0, ddof=1) + reference_scores.var(axis=0, ddof=1))
    pooled_std = np.sqrt(np.maximum(pooled_var, VARIANCE_FLOOR))
    is_member = np.abs(audited_scores - m_t) < np.abs(audited_scores - m_r)
    return is_member, m_t, m_r, pooled_std


def ulira(spec, shadows: ShadowSet, audited: np.ndarray, attack: AttackSet) -> MiaReport:
    """Score the audited model against the shadow hypotheses over the attack set."""
    X = np.vstack([attack.members.X, attack.nonmembers.X])
    y = np.concatenate([attack.members.y, attack.nonmembers.y])
    n_m = attack.members.n

    target_scores = np.stack([mia_score(spec, m, X, y) for m in shadows.targets])
    ref_scores = np.stack([mia_score(spec, m, X, y) for m in shadows.references])
    audited_scores = mia_score(spec, audited, X, y)

    is_member, m_t, m_r, pooled_std = lira_decisions(target_scores, ref_scores, audited_scores)
    truth = np.arange(len(y)) < n_m
    accuracy = float((is_member == truth).mean())

    per_sample = {}
    for i in range(len(y)):
        key = f"member:{i}" if i < n_m else f"nonmember:{i - n_m}"
        per_sample[key] = (
            float(audited_scores[i]),
            float(m_t[i]),
            float(m_r[i]),
            float(pooled_std[i]),
        )
    return MiaReport(accuracy=accuracy, per_sample_scores=per_sample, n_attacked=len(y))
