"""Datasets: CSV loading and seeded synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reinbo.errors import InputError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    class_count: int
    feature_names: tuple[str, ...] = ()
    class_labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InputError(f"X shape {X.shape} does not match {y.shape[0]} labels")
        if not np.all(np.isfinite(X)):
            raise InputError("dataset contains missing or non-finite feature values")
        if self.class_count < 2 or X.shape[0] < self.class_count:
            raise InputError("need at least 2 classes and n_obs >= class_count")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise InputError("labels must be integer codes 0..class_count-1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.class_count, self.feature_names, self.class_labels)


def load_csv(path: str | Path, delimiter: str = ",") -> Dataset:
    """Headered delimited file; last column is the class label, the rest numeric."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise InputError(f"{path}: need at least one feature column and a label column")
    X = np.empty((len(body), len(header) - 1))
    labels = []
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        for j, cell in enumerate(row[:-1]):
            cell = cell.strip()
            if cell in ("", "NA", "NaN", "nan", "?"):
                raise InputError(f"{path}: missing value at row {i}, column {header[j]!r}")
            try:
                X[i - 2, j] = float(cell)
            except ValueError:
                raise InputError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {header[j]!r}"
                ) from None
        label = row[-1].strip()
        if label == "":
            raise InputError(f"{path}: missing label at row {i}")
        labels.append(label)
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise InputError(f"{path}: non-finite value at row {bad[0] + 2}, column {header[bad[1]]!r}")
    classes = sorted(set(labels), key=_label_sort_key)
    code = {c: k for k, c in enumerate(classes)}
    y = np.array([code[v] for v in labels])
    return Dataset(X, y, len(classes), tuple(header[:-1]), tuple(classes))


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def save_csv(data: Dataset, path: str | Path) -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    labels = data.class_labels or tuple(str(k) for k in range(data.class_count))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "class"])
        for row, lab in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in row] + [labels[lab]])


def _balanced_labels(n: int, n_classes: int, rng: np.random.Generator) -> np.ndarray:
    y = np.arange(n) % n_classes
    return rng.permutation(y)


def make_blobs(
    n: int = 300,
    p: int = 10,
    n_classes: int = 2,
    separation: float = 1.0,
    n_informative: int | None = None,
    seed: int = 0,
) -> Dataset:
    """Isotropic Gaussian classes; class means are ``separation`` apart per informative axis."""
    rng = np.random.default_rng(seed)
    k = p if n_informative is None else n_informative
    y = _balanced_labels(n, n_classes, rng)
    centers = np.zeros((n_classes, p))
    centers[:, :k] = rng.normal(scale=separation, size=(n_classes, k))
    X = centers[y] + rng.normal(size=(n, p))
    return Dataset(X, y, n_classes)


def make_separated_blobs(n: int = 200, p: int = 2, gap_sd: float = 6.0, seed: int = 0) -> Dataset:
    """Two classes whose means differ by ``gap_sd`` standard deviations along one axis."""
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, 2, rng)
    X = rng.normal(size=(n, p))
    X[:, 0] += gap_sd * y
    return Dataset(X, y, 2)


def make_filter_benchmark(
    n: int = 200, n_signal: int = 5, n_noise: int = 5, shift: float = 2.0, seed: int = 0
) -> Dataset:
    """Leading ``n_signal`` columns carry a class shift, the rest are pure noise."""
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, 2, rng)
    X = rng.normal(size=(n, n_signal + n_noise))
    X[:, :n_signal] += shift * y[:, None]
    return Dataset(X, y, 2)


def make_permutation_null(n: int = 200, p: int = 5, n_classes: int = 2, seed: int = 0) -> Dataset:
    """Balanced labels drawn independently of the features."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = _balanced_labels(n, n_classes, rng)
    return Dataset(X, y, n_classes)


def make_label_copy(
    n: int = 100, p: int = 3, n_classes: int = 2, label_gap: float = 10.0, seed: int = 0
) -> Dataset:
    """First feature is ``label_gap * label``; the others are uniform noise in [0, 1).

    Noise distances are below sqrt(p - 1), so with label_gap above that the
    nearest neighbour of every point shares its label.
    """
    rng = np.random.default_rng(seed)
    y = _balanced_labels(n, n_classes, rng)
    X = rng.random((n, p))
    X[:, 0] = label_gap * y
    return Dataset(X, y, n_classes)


SYNTHETIC = {
    "blobs": make_blobs,
    "separated_blobs": make_separated_blobs,
    "filter_benchmark": make_filter_benchmark,
    "permutation_null": make_permutation_null,
    "label_copy": make_label_copy,
}


def make_synthetic(spec: dict) -> Dataset:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in SYNTHETIC:
        raise InputError(f"unknown synthetic dataset kind {kind!r}; choose from {sorted(SYNTHETIC)}")
    try:
        return SYNTHETIC[kind](**spec)
    except TypeError as exc:
        raise InputError(f"bad arguments for synthetic dataset {kind!r}: {exc}") from exc


def class_counts(y: np.ndarray, class_count: int) -> np.ndarray:
    return np.bincount(y, minlength=class_count)


def majority_mmce(y: np.ndarray, class_count: int) -> float:
    counts = class_counts(y, class_count)
    return 1.0 - counts.max() / counts.sum() if counts.sum() else math.nan
