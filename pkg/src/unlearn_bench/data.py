"""Datasets, retain/forget/test splits, and dataset ingestion.

The on-disk format is a plain CSV with a mandatory header ``f_0..f_{s-1},label``,
one sample per row, features scaled to [0, 1].  Digits exports carry 64
features (pixel values divided by 16) and 10 classes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import RngStream


@dataclass(frozen=True)
class Sample:
    """One labeled point: a feature vector in [0,1]^s and a class index."""

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """A dense labeled dataset held as (n, s) features and (n,) integer labels."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise DataError(
                f"inconsistent dataset shapes: X {self.X.shape}, y {self.y.shape}"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.X.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.y.max()) + 1 if self.n else 0

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])

    def sample(self, i: int) -> Sample:
        return Sample(self.X[i], int(self.y[i]))

    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.num_classes)


@dataclass(frozen=True)
class DataSplit:
    """Retain/forget/test partition with index provenance into the source dataset.

    ``r_f`` is always the realized forget fraction n_f / (n_f + n_r), recomputed
    from the actual subset sizes rather than the requested value.
    """

    retain: Dataset
    forget: Dataset
    test: Dataset
    retain_idx: np.ndarray
    forget_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self) -> None:
        if np.intersect1d(self.retain_idx, self.forget_idx).size:
            raise DataError("retain and forget index sets overlap")

    @property
    def r_f(self) -> float:
        return self.forget.n / (self.forget.n + self.retain.n)

    @property
    def ratio(self) -> float:
        """The ascent weight r_f / (1 - r_f) = n_f / n_r."""
        return self.forget.n / self.retain.n

    @property
    def n_train(self) -> int:
        return self.retain.n + self.forget.n

    def train_pool(self) -> Dataset:
        """Retain and forget samples together, in provenance order."""
        idx = np.concatenate([self.retain_idx, self.forget_idx])
        return Dataset(
            np.vstack([self.retain.X, self.forget.X]),
            np.concatenate([self.retain.y, self.forget.y]),
        )


def load_dataset(path: str | Path) -> Dataset:
    """Parse a dataset CSV, validating the header, feature range, and labels."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read dataset: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row")
        n_feat = len(header) - 1
        expected = [f"f_{i}" for i in range(n_feat)] + ["label"]
        if n_feat < 1 or header != expected:
            raise DataError(f"{path}: bad header {header!r}, expected f_0..f_{{s-1}},label")
        feats: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n_feat + 1:
                raise DataError(f"{path}:{lineno}: expected {n_feat + 1} columns, got {len(row)}")
            try:
                feats.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not feats:
        raise DataError(f"{path}: no data rows after header")
    X = np.asarray(feats, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.min() < 0.0 or X.max() > 1.0:
        raise DataError(f"{path}: features must lie in [0, 1], found range [{X.min()}, {X.max()}]")
    if y.min() < 0:
        raise DataError(f"{path}: negative class label")
    return Dataset(X, y)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f_{i}" for i in range(dataset.feature_dim)] + ["label"])
        for i in range(dataset.n):
            writer.writerow([repr(float(v)) for v in dataset.X[i]] + [int(dataset.y[i])])


def gaussian_blobs(
    n: int,
    feature_dim: int,
    num_classes: int,
    rng: RngStream,
    separation: float = 2.0,
) -> Dataset:
    """Synthetic classification data: one Gaussian blob per class, min-max scaled to [0,1].

    Controllable size and separation make these instances suitable for oracle
    and scaling tests where real data is too slow or too easy.
    """
    gen = rng.generator()
    centers = gen.standard_normal((num_classes, feature_dim)) * separation
    y = gen.integers(0, num_classes, size=n)
    X = centers[y] + gen.standard_normal((n, feature_dim))
    lo, hi = X.min(axis=0), X.max(axis=0)
    X = (X - lo) / np.where(hi > lo, hi - lo, 1.0)
    return Dataset(X, y.astype(np.int64))


def make_split(
    dataset: Dataset,
    r_f: float,
    test_fraction: float,
    rng: RngStream,
    forget_rng: RngStream | None = None,
) -> DataSplit:
    """Partition a dataset into test / forget / retain subsets.

    The test subset is drawn first (without replacement), then the forget
    subset is drawn uniformly without replacement from the remaining training
    pool.  Passing a separate ``forget_rng`` keeps the test partition fixed
    while the forget set is re-sampled across seeds.
    """
    if not 0.0 < r_f < 1.0:
        raise ValueError(f"r_f must lie in (0, 1), got {r_f}")
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    n = dataset.n
    n_test = int(round(test_fraction * n))
    if r_f * (n - n_test) < 1.0:
        raise ValueError(
            f"requested r_f={r_f} yields an empty forget set on a training pool of {n - n_test}"
        )
    gen = rng.generator()
    perm = gen.permutation(n)
    test_idx = np.sort(perm[:n_test])
    pool_idx = np.sort(perm[n_test:])

    n_f = int(round(r_f * pool_idx.size))
    n_f = min(max(n_f, 1), pool_idx.size - 1)
    fgen = (forget_rng or rng.derive(1)).generator()
    forget_pos = fgen.choice(pool_idx.size, size=n_f, replace=False)
    mask = np.zeros(pool_idx.size, dtype=bool)
    mask[forget_pos] = True
    forget_idx = pool_idx[mask]
    retain_idx = pool_idx[~mask]

    return DataSplit(
        retain=dataset.subset(retain_idx),
        forget=dataset.subset(forget_idx),
        test=dataset.subset(test_idx),
        retain_idx=retain_idx,
        forget_idx=forget_idx,
        test_idx=test_idx,
    )
