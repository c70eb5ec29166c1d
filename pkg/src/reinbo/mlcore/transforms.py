"""Preprocessing and feature-engineering operators.

Each operator is fitted on training rows only and then applied with the
frozen parameters, so held-out folds never leak into the fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from reinbo.errors import ContractViolation


@dataclass(frozen=True)
class FittedTransform:
    kind: str
    n_features_in: int
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    unit_rows: bool = False
    basis: np.ndarray | None = None  # (n_features_in, rank), PCA only
    keep: np.ndarray | None = None  # selected column indices, filters only

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in:
            raise ContractViolation(
                f"{self.kind}: fitted on {self.n_features_in} features, got {X.shape}"
            )
        out = X
        if self.center is not None:
            out = out - self.center
        if self.scale is not None:
            out = out / self.scale
        if self.unit_rows:
            norms = np.linalg.norm(out, axis=1, keepdims=True)
            out = np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)
        if self.basis is not None:
            out = out @ self.basis
        if self.keep is not None:
            out = out[:, self.keep]
        return out


def _safe_scale(s: np.ndarray) -> np.ndarray:
    # near-zero spread means a constant column (up to rounding)
    return np.where(s > 1e-12, s, 1.0)


def _standardise(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    center = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
    return center, _safe_scale(scale)


def anova_f(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """One-way ANOVA F statistic per column; constant columns score -inf."""
    classes = np.unique(y)
    n, g = X.shape[0], classes.size
    grand = X.mean(axis=0)
    ss_between = np.zeros(X.shape[1])
    ss_within = np.zeros(X.shape[1])
    for c in classes:
        Xc = X[y == c]
        mc = Xc.mean(axis=0)
        ss_between += Xc.shape[0] * (mc - grand) ** 2
        ss_within += ((Xc - mc) ** 2).sum(axis=0)
    if g < 2 or n <= g:
        return np.full(X.shape[1], -np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ss_between / (g - 1)) / (ss_within / (n - g))
    f = np.where(ss_within > 0, f, np.where(ss_between > 0, np.inf, -np.inf))
    return f


def kruskal_h(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Kruskal-Wallis H per column, tie-corrected; constant columns score -inf."""
    n = X.shape[0]
    R = rankdata(X, axis=0)
    h = np.zeros(X.shape[1])
    for c in np.unique(y):
        mask = y == c
        h += R[mask].sum(axis=0) ** 2 / mask.sum()
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    ties = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        _, t = np.unique(X[:, j], return_counts=True)
        ties[j] = 1.0 - (t**3 - t).sum() / (n**3 - n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ties > 0, h / ties, -np.inf)


def stump_accuracy(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Training accuracy of the best single-threshold split per column."""
    n = X.shape[0]
    classes, codes = np.unique(y, return_inverse=True)
    out = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, cs = X[order, j], codes[order]
        onehot = np.zeros((n, classes.size))
        onehot[np.arange(n), cs] = 1
        left = np.cumsum(onehot, axis=0)
        total = left[-1]
        best = total.max()  # no split
        cuts = np.flatnonzero(xs[1:] > xs[:-1])
        if cuts.size:
            lc = left[cuts]
            best = max(best, (lc.max(axis=1) + (total - lc).max(axis=1)).max())
        out[j] = best / n
    return out


FILTER_SCORES = {
    "FilterAnova": anova_f,
    "FilterKruskal": kruskal_h,
    "FilterUnivariate": stump_accuracy,
}


def top_features(scores: np.ndarray, n_keep: int) -> np.ndarray:
    """Indices of the ``n_keep`` best scores, ties to the lower column index, sorted."""
    order = np.lexsort((np.arange(scores.size), -scores))
    return np.sort(order[:n_keep])


def fit_transform(
    name: str, params: dict[str, float], X: np.ndarray, y: np.ndarray
) -> tuple[FittedTransform, np.ndarray]:
    """Fit operator ``name`` on training data and return it with the transformed data."""
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if name == "NA":
        t = FittedTransform("NA", p)
    elif name == "Scale(default)":
        c, s = _standardise(X)
        t = FittedTransform(name, p, center=c, scale=s)
    elif name == "Scale(center=FALSE)":
        # root-mean-square divisor, as R's scale(center = FALSE)
        rms = np.sqrt((X**2).sum(axis=0) / max(X.shape[0] - 1, 1))
        t = FittedTransform(name, p, scale=_safe_scale(rms))
    elif name == "Scale(scale=FALSE)":
        t = FittedTransform(name, p, center=X.mean(axis=0))
    elif name == "SpatialSign":
        c, s = _standardise(X)
        t = FittedTransform(name, p, center=c, scale=s, unit_rows=True)
    elif name == "Pca":
        rank = int(min(max(round(params["rank"]), 1), p))
        c = X.mean(axis=0)
        _, _, vt = np.linalg.svd(X - c, full_matrices=True)
        t = FittedTransform(name, p, center=c, basis=vt[:rank].T.copy())
    elif name in FILTER_SCORES:
        n_keep = min(p, max(1, math.ceil(params["perc"] * p - 1e-9)))
        scores = FILTER_SCORES[name](X, y)
        t = FittedTransform(name, p, keep=top_features(scores, n_keep))
    else:
        raise ContractViolation(f"unknown transform operation {name!r}")
    return t, t.apply(X)


def apply_transform(t: FittedTransform, X: np.ndarray) -> np.ndarray:
    return t.apply(X)
