"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Bad configuration: dimension mismatches, invalid hyperparameters."""


class DataError(ValueError):
    """Malformed or out-of-contract input data."""


class ConvergenceError(RuntimeError):
    """Optimizer hit its iteration cap before reaching the target residual."""

    def __init__(self, message: str, grad_norm: float):
        super().__init__(message)
        self.grad_norm = grad_norm
