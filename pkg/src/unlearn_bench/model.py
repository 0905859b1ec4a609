"""Regularized multinomial logistic regression with certified regularity constants.

The per-sample loss is

    l(theta, (x, y)) = -log softmax(W @ [x, 1])_y + (lam / 2) * ||theta||^2

with theta the flattened (num_classes, feature_dim + 1) weight matrix (one
bias column per class).  Because the regularizer covers every coordinate,
the loss is exactly lam-strongly convex; the softmax Hessian is bounded by
I/2 in logit space, which gives the closed-form smoothness bound

    beta <= lam + max_i ||[x_i, 1]||^2 / 2.

Both constants are stored on :class:`LossSpec` and drive every step-size and
noise schedule downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, Sample
from .errors import ConfigError, ConvergenceError

TRAIN_ITERATION_CAP = 10**6


def _augment(X: np.ndarray) -> np.ndarray:
    """Append the constant bias feature."""
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class LossSpec:
    """Loss constants for one dataset: L2 weight, mu, a certified smoothness bound, and shapes."""

    lam: float
    mu: float
    beta_bound: float
    num_classes: int
    feature_dim: int

    def __post_init__(self) -> None:
        if self.lam <= 0 or self.mu <= 0:
            raise ConfigError("lam and mu must be positive for strong convexity")
        if not np.isfinite(self.beta_bound) or self.beta_bound < self.mu:
            raise ConfigError(f"beta_bound must be finite and >= mu, got {self.beta_bound}")

    @property
    def dim(self) -> int:
        """Flattened parameter dimension: num_classes * (feature_dim + 1)."""
        return self.num_classes * (self.feature_dim + 1)

    @property
    def kappa_l(self) -> float:
        """Condition number beta / mu of the per-sample loss."""
        return self.beta_bound / self.mu

    def _check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ConfigError(f"theta has shape {theta.shape}, expected ({self.dim},)")
        return theta

    # --- batched oracles (the hot path) -------------------------------------

    def batch_loss(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
        """Mean regularized loss over a batch."""
        theta = self._check_theta(theta)
        if X.shape[1] != self.feature_dim:
            raise ConfigError(f"features have dim {X.shape[1]}, spec expects {self.feature_dim}")
        W = theta.reshape(self.num_classes, self.feature_dim + 1)
        logp = _log_softmax(_augment(X) @ W.T)
        ce = -logp[np.arange(len(y)), y].mean()
        return float(ce + 0.5 * self.lam * theta @ theta)

    def batch_grad(self, theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Mean gradient over a batch; exact analytic form."""
        theta = self._check_theta(theta)
        if len(y) == 0:
            raise ValueError("empty batch")
        if X.shape[1] != self.feature_dim:
            raise ConfigError(f"features have dim {X.shape[1]}, spec expects {self.feature_dim}")
        Xa = _augment(X)
        W = theta.reshape(self.num_classes, self.feature_dim + 1)
        P = np.exp(_log_softmax(Xa @ W.T))
        P[np.arange(len(y)), y] -= 1.0
        G = (P.T @ Xa) / len(y) + self.lam * W
        return G.reshape(-1)

    def predict_log_proba(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        theta = self._check_theta(theta)
        W = theta.reshape(self.num_classes, self.feature_dim + 1)
        return _log_softmax(_augment(X) @ W.T)

    def predict_proba(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        return np.exp(self.predict_log_proba(theta, X))


def sample_loss(spec: LossSpec, theta: np.ndarray, xi: Sample) -> float:
    """Regularized loss of a single sample."""
    return spec.batch_loss(theta, xi.features[None, :], np.array([xi.label]))


def sample_grad(spec: LossSpec, theta: np.ndarray, xi: Sample) -> np.ndarray:
    """Analytic gradient of :func:`sample_loss`."""
    return spec.batch_grad(theta, xi.features[None, :], np.array([xi.label]))


def batch_grad(spec: LossSpec, theta: np.ndarray, data: Dataset) -> np.ndarray:
    """Mean gradient over a dataset."""
    return spec.batch_grad(theta, data.X, data.y)


def batch_loss(spec: LossSpec, theta: np.ndarray, data: Dataset) -> float:
    return spec.batch_loss(theta, data.X, data.y)


def estimate_constants(lam: float, data: Dataset) -> tuple[float, float]:
    """Certified (mu, beta_bound) for the regularized loss on this dataset.

    mu equals lam exactly (the regularizer covers all coordinates); beta is
    bounded via the softmax-Hessian bound applied to bias-augmented features.
    """
    if data.n == 0:
        raise ValueError("empty dataset")
    sq_norms = (data.X**2).sum(axis=1) + 1.0
    return lam, lam + 0.5 * float(sq_norms.max())


def make_spec(lam: float, data: Dataset, num_classes: int | None = None) -> LossSpec:
    """Build a LossSpec with constants estimated from the dataset."""
    mu, beta = estimate_constants(lam, data)
    return LossSpec(
        lam=lam,
        mu=mu,
        beta_bound=beta,
        num_classes=num_classes or data.num_classes,
        feature_dim=data.feature_dim,
    )


def train_to_optimum(
    spec,
    data: Dataset,
    tol: float,
    theta0: np.ndarray | None = None,
    max_iter: int = TRAIN_ITERATION_CAP,
) -> np.ndarray:
    """Deterministic full-batch gradient descent to gradient norm <= tol.

    Step size 1/beta_bound guarantees monotone convergence for smooth,
    strongly convex objectives.  Works for any spec exposing ``batch_grad``,
    ``beta_bound``, and ``dim``; accepts a warm start.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    theta = np.zeros(spec.dim) if theta0 is None else np.array(theta0, dtype=np.float64)
    step = 1.0 / spec.beta_bound
    X, y = data.X, data.y
    grad_norm = np.inf
    for _ in range(max_iter):
        g = spec.batch_grad(theta, X, y)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= tol:
            return theta
        theta = theta - step * g
    raise ConvergenceError(
        f"gradient norm {grad_norm:.3e} above tol {tol:.1e} after {max_iter} iterations",
        grad_norm=grad_norm,
    )


def excess_risk(spec, theta: np.ndarray, test: Dataset, theta_ref: np.ndarray) -> float:
    """Mean test loss of theta minus that of the retrained reference.

    Slightly negative values are possible (finite-sample noise) and reported
    as-is; aggregation applies its own floor.
    """
    if test.n == 0:
        raise ValueError("empty test set")
    return spec.batch_loss(theta, test.X, test.y) - spec.batch_loss(theta_ref, test.X, test.y)
