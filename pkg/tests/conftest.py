from __future__ import annotations

import numpy as np
import pytest
from sklearn.datasets import load_digits

from unlearn_bench import Dataset, RngStream, gaussian_blobs, make_spec, make_split, train_to_optimum
from unlearn_bench.bench import OPTIMUM_TOL, OptimaCache


@pytest.fixture(scope="session")
def digits() -> Dataset:
    raw = load_digits()
    return Dataset(raw.data / 16.0, raw.target.astype(np.int64))


@pytest.fixture(scope="session")
def digits_spec(digits):
    return make_spec(0.1, digits)


@pytest.fixture(scope="session")
def blobs() -> Dataset:
    return gaussian_blobs(400, 10, 3, RngStream(7), separation=2.0)


@pytest.fixture(scope="session")
def blobs_spec(blobs):
    return make_spec(0.1, blobs)


@pytest.fixture(scope="session")
def blobs_split(blobs):
    return make_split(blobs, 0.1, 0.2, RngStream(0).derive(1), forget_rng=RngStream(3).derive(2))


@pytest.fixture(scope="session")
def blobs_optima(blobs_spec, blobs_split):
    theta_star = train_to_optimum(blobs_spec, blobs_split.train_pool(), OPTIMUM_TOL)
    theta_r_star = train_to_optimum(blobs_spec, blobs_split.retain, OPTIMUM_TOL, theta0=theta_star)
    return theta_star, theta_r_star


@pytest.fixture(scope="session")
def optima_cache():
    # shared across test modules so repeated grids reuse converged optima
    return OptimaCache()
