"""Deterministic test objectives and dataset generation.

A problem is anything exposing ``dim``, ``gradient(x)`` and, where defined,
``value(x)``.  Stochastic objectives additionally expose
``value_and_gradient(x)``; see :mod:`sfopt.mlp`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DatasetFormatError
from .vectors import as_vector, rng_stream

__all__ = [
    "Quadratic",
    "corollary1_pair",
    "RescaledOracle",
    "LossScaler",
    "Dataset",
    "gen_blobs",
    "save_dataset_csv",
    "load_dataset_csv",
]


class Quadratic:
    """Diagonal quadratic ``0.5 * x' diag(h) x + b' x + c`` with ``h > 0``."""

    def __init__(self, h_diag, b=None, c: float = 0.0):
        self.h_diag = as_vector(h_diag, "h_diag")
        if not np.all(self.h_diag > 0.0):
            bad = int(np.flatnonzero(~(self.h_diag > 0.0))[0])
            raise ValueError(f"h_diag[{bad}] = {self.h_diag[bad]} is not positive")
        if b is None:
            self.b = np.zeros_like(self.h_diag)
        else:
            self.b = as_vector(b, "b")
            if self.b.shape != self.h_diag.shape:
                raise ValueError("b length differs from h_diag")
        self.c = float(c)

    @property
    def dim(self) -> int:
        return self.h_diag.shape[0]

    @property
    def minimizer(self) -> np.ndarray:
        return -self.b / self.h_diag

    @property
    def condition_number(self) -> float:
        return float(np.max(self.h_diag) / np.min(self.h_diag))

    def value(self, x) -> float:
        x = as_vector(x, "x")
        return float(0.5 * np.dot(self.h_diag * x, x) + np.dot(self.b, x) + self.c)

    def gradient(self, x) -> np.ndarray:
        x = as_vector(x, "x")
        return self.h_diag * x + self.b

    def value_and_gradient(self, x):
        x = as_vector(x, "x")
        return self.value(x), self.gradient(x)

    def __repr__(self):
        return f"Quadratic(dim={self.dim}, kappa={self.condition_number:g})"


def corollary1_pair(q: Quadratic) -> tuple[Quadratic, Quadratic]:
    """Pair a quadratic with its unit-curvature twin.

    The twin has identity Hessian, offset ``b / h`` and the same constant, so
    it shares the original's minimizer while its gradient differs from the
    original's only by the fixed per-coordinate factor ``h``.  A scale-free
    optimizer therefore walks the same path on both.
    """
    return q, Quadratic(np.ones_like(q.h_diag), q.b / q.h_diag, q.c)


class RescaledOracle:
    """Gradient oracle multiplied per coordinate by a fixed positive vector.

    The value oracle is only defined when the base problem is a
    :class:`Quadratic` (where the rescaled gradient field is again a
    quadratic's); otherwise only gradients are served.
    """

    def __init__(self, base, scale):
        self.base = base
        self.scale = as_vector(scale, "scale")
        if not np.all(self.scale > 0.0):
            raise ValueError("scale must be positive in every coordinate")
        if self.scale.shape[0] != base.dim:
            raise ValueError("scale length differs from problem dimension")
        if isinstance(base, Quadratic):
            self._equiv = Quadratic(base.h_diag * self.scale, base.b * self.scale, base.c)
        else:
            self._equiv = None

    @property
    def dim(self) -> int:
        return self.base.dim

    def gradient(self, x) -> np.ndarray:
        return self.scale * self.base.gradient(x)

    def value(self, x) -> float:
        if self._equiv is None:
            raise NotImplementedError("value oracle only defined for a quadratic base")
        return self._equiv.value(x)

    @property
    def minimizer(self) -> np.ndarray:
        # positive rescaling moves no stationary point
        return self.base.minimizer


class LossScaler:
    """Multiply a problem's value and gradient by a constant factor."""

    def __init__(self, base, factor: float):
        if not (factor > 0.0):
            raise ValueError(f"factor must be positive, got {factor}")
        self.base = base
        self.factor = float(factor)

    @property
    def dim(self) -> int:
        return self.base.dim

    def value(self, x) -> float:
        return self.factor * self.base.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.factor * self.base.gradient(x)

    def value_and_gradient(self, x):
        value, grad = self.base.value_and_gradient(x)
        return self.factor * value, self.factor * grad

    def __getattr__(self, name):
        # metrics helpers (accuracy, splits, ...) pass through untouched
        return getattr(self.base, name)


@dataclass(frozen=True)
class Dataset:
    """A labelled point cloud with a fixed seed for downstream splits."""

    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    seed: int

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise ValueError(f"inputs must be 2-D, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError("labels length differs from number of rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs contain non-finite entries")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError("labels out of range")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def split_indices(self, train_fraction: float = 0.8):
        """Seeded shuffle split; the same dataset always splits the same way."""
        perm = rng_stream(self.seed, 3).permutation(self.n)
        n_train = int(train_fraction * self.n)
        return perm[:n_train], perm[n_train:]


def gen_blobs(seed: int, n_classes: int = 3, dim: int = 16, n_per_class: int = 512,
              spread: float = 1.0) -> Dataset:
    """Gaussian clusters with class centers on a scaled coordinate simplex.

    Class k sits at ``4 * spread`` along axis k, so classes are well separated
    at the default spread but still overlap in the tails.
    """
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    if dim < n_classes:
        raise ValueError(f"dim {dim} too small for {n_classes} simplex centers")
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if not (spread > 0.0):
        raise ValueError(f"spread must be positive, got {spread}")
    rng = rng_stream(seed, 0)
    rows = []
    labels = []
    for k in range(n_classes):
        center = np.zeros(dim)
        center[k] = 4.0 * spread
        rows.append(center + spread * rng.standard_normal((n_per_class, dim)))
        labels.append(np.full(n_per_class, k, dtype=np.int64))
    return Dataset(
        inputs=np.concatenate(rows, axis=0),
        labels=np.concatenate(labels),
        n_classes=n_classes,
        seed=seed,
    )


def save_dataset_csv(dataset: Dataset, path):
    """Write ``f0,...,f{d-1},label`` rows with full float round-trip precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.dim)] + ["label"])
        for row, label in zip(dataset.inputs, dataset.labels):
            writer.writerow([format(v, ".17g") for v in row] + [str(int(label))])


def load_dataset_csv(path, n_classes: int | None = None, seed: int = 0) -> Dataset:
    """Parse a ``f0,...,f{d-1},label`` file.

    Any malformed row aborts the load with :class:`DatasetFormatError`
    carrying the 1-based line number; a dataset with silently dropped rows
    would poison every downstream comparison.
    """
    rows = []
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(1, "empty file") from None
        d = len(header) - 1
        if d < 1 or header != [f"f{i}" for i in range(d)] + ["label"]:
            raise DatasetFormatError(1, f"bad header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise DatasetFormatError(line_no, f"expected {d + 1} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:d]])
                labels.append(int(row[d]))
            except ValueError as exc:
                raise DatasetFormatError(line_no, str(exc)) from None
    if not rows:
        raise DatasetFormatError(2, "no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    return Dataset(
        inputs=np.asarray(rows, dtype=np.float64),
        labels=labels,
        n_classes=n_classes,
        seed=seed,
    )
