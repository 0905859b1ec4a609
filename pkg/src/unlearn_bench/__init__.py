"""Certified machine unlearning on strongly convex objectives.

Implements variance-reduced unlearning with (epsilon, delta) noise
calibration, the standard retraining/unlearning baselines, a budget-fair
benchmark harness, and a U-LiRA membership-inference auditor.
"""

from .audit import AttackSet, MiaReport, ShadowSet, build_attack_set, build_shadows, mia_score, ulira
from .baselines import BaselineConfig, fine_tune, measure_sensitivity, neggrad_plus, nft, scrub
from .bench import (
    Aggregate,
    FigResult,
    RunRecord,
    UnlearnConfig,
    aggregate,
    run_ablation,
    run_fig1,
    run_fig2,
)
from .data import DataSplit, Dataset, Sample, gaussian_blobs, load_dataset, make_split
from .engines import (
    BudgetMeter,
    StepSchedule,
    project_ball,
    psgd,
    retrain_gd,
    retrain_sgd,
    retrain_svrg,
)
from .errors import ConfigError, ConvergenceError, DataError
from .model import (
    LossSpec,
    estimate_constants,
    excess_risk,
    make_spec,
    sample_grad,
    sample_loss,
    train_to_optimum,
)
from .rng import RngStream
from .vru import (
    PrivacyBudget,
    VruResult,
    VruSchedule,
    h_of,
    kappa_dp,
    noise_model,
    vru_gradient,
    vru_run,
)

__all__ = [
    "Aggregate",
    "AttackSet",
    "BaselineConfig",
    "BudgetMeter",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DataSplit",
    "Dataset",
    "FigResult",
    "LossSpec",
    "MiaReport",
    "PrivacyBudget",
    "RngStream",
    "RunRecord",
    "Sample",
    "ShadowSet",
    "StepSchedule",
    "UnlearnConfig",
    "VruResult",
    "VruSchedule",
    "aggregate",
    "build_attack_set",
    "build_shadows",
    "estimate_constants",
    "excess_risk",
    "fine_tune",
    "gaussian_blobs",
    "h_of",
    "kappa_dp",
    "load_dataset",
    "make_spec",
    "make_split",
    "measure_sensitivity",
    "mia_score",
    "neggrad_plus",
    "nft",
    "noise_model",
    "project_ball",
    "psgd",
    "retrain_gd",
    "retrain_sgd",
    "retrain_svrg",
    "run_ablation",
    "run_fig1",
    "run_fig2",
    "sample_grad",
    "sample_loss",
    "scrub",
    "train_to_optimum",
    "ulira",
    "vru_gradient",
    "vru_run",
]
