"""Desk-scale classifiers behind the learner operations.

These are behavioural analogues of the R learners, keeping each learner's
hyperparameter semantics:

* ``kknn``: k-nearest neighbours, Euclidean distance, uniform vote.
* ``ksvm``: RBF kernel regularised least squares, one-vs-rest, ridge 1/C,
  kernel ``exp(-sigma * ||x - x'||^2)``.
* ``ranger``: random forest of 100 CART trees (scikit-learn).
* ``xgboost``: Newton-boosted depth-capped trees on logistic loss,
  one-vs-rest, 50 rounds.
* ``naiveBayes``: Gaussian naive Bayes; ``laplace`` shrinks each class
  variance toward the pooled variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, logsumexp
from sklearn.ensemble import RandomForestClassifier
from sklearn.tree import DecisionTreeRegressor

from reinbo.errors import ContractViolation

RANGER_TREES = 100
RANGER_MAX_DEPTH = 20
XGB_ROUNDS = 50
XGB_LAMBDA = 1.0


@dataclass
class FittedModel:
    kind: str
    n_features_in: int
    class_count: int
    state: dict[str, Any] = field(default_factory=dict)
    degenerate: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in:
            raise ContractViolation(
                f"{self.kind}: fitted on {self.n_features_in} features, got {X.shape}"
            )
        if self.degenerate:
            return np.full(X.shape[0], self.state["label"], dtype=int)
        return _PREDICT[self.kind](self, X)


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**31 - 1))


def _first_max(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest label
    return np.argmax(scores, axis=1)


# --- kknn ----------------------------------------------------------------

def _fit_kknn(m: FittedModel, X, y, params, rng) -> None:
    m.state.update(X=X, y=y, k=int(min(max(round(params["k"]), 1), X.shape[0])))


def _predict_kknn(m: FittedModel, X) -> np.ndarray:
    D = cdist(X, m.state["X"], "sqeuclidean")
    k = m.state["k"]
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    votes = np.zeros((X.shape[0], m.class_count))
    np.add.at(votes, (np.repeat(np.arange(X.shape[0]), k), m.state["y"][nn].ravel()), 1.0)
    return _first_max(votes)


# --- naiveBayes ----------------------------------------------------------

def _fit_nb(m: FittedModel, X, y, params, rng) -> None:
    C, p = m.class_count, X.shape[1]
    counts = np.bincount(y, minlength=C).astype(float)
    means = np.zeros((C, p))
    var = np.zeros((C, p))
    for c in range(C):
        Xc = X[y == c]
        if len(Xc):
            means[c] = Xc.mean(axis=0)
            var[c] = Xc.var(axis=0)
    resid = X - means[y]
    pooled = (resid**2).sum(axis=0) / max(X.shape[0] - C, 1)
    # laplace acts as a pseudo-count of observations at the pooled variance
    a = float(params["laplace"])
    smoothed = (counts[:, None] * var + a * np.maximum(pooled, 1e-12)) / (counts[:, None] + a)
    m.state.update(
        means=means,
        var=smoothed + 1e-12,
        log_prior=np.log(np.where(counts > 0, counts / counts.sum(), 1e-300)),
    )


def nb_log_posterior(m: FittedModel, X: np.ndarray) -> np.ndarray:
    means, var = m.state["means"], m.state["var"]
    ll = -0.5 * (
        np.log(2 * np.pi * var)[None, :, :] + (X[:, None, :] - means[None]) ** 2 / var[None]
    ).sum(axis=2)
    joint = ll + m.state["log_prior"][None, :]
    return joint - logsumexp(joint, axis=1, keepdims=True)


def nb_predict_proba(m: FittedModel, X: np.ndarray) -> np.ndarray:
    return np.exp(nb_log_posterior(m, np.asarray(X, dtype=float)))


def _predict_nb(m: FittedModel, X) -> np.ndarray:
    return _first_max(nb_log_posterior(m, X))


# --- ksvm (RBF regularised least squares) --------------------------------

def _rbf(A, B, sigma) -> np.ndarray:
    return np.exp(-sigma * cdist(A, B, "sqeuclidean"))


def _fit_ksvm(m: FittedModel, X, y, params, rng) -> None:
    sigma, C = float(params["sigma"]), float(params["C"])
    Y = -np.ones((X.shape[0], m.class_count))
    Y[np.arange(X.shape[0]), y] = 1.0
    lam, V = np.linalg.eigh(_rbf(X, X, sigma))
    lam = np.maximum(lam, 0.0)
    coef = V @ ((V.T @ Y) / (lam + 1.0 / C)[:, None])
    m.state.update(X=X, coef=coef, sigma=sigma)


def _predict_ksvm(m: FittedModel, X) -> np.ndarray:
    return _first_max(_rbf(X, m.state["X"], m.state["sigma"]) @ m.state["coef"])


# --- ranger --------------------------------------------------------------

def _fit_ranger(m: FittedModel, X, y, params, rng) -> None:
    mtry = int(min(max(round(params["mtry"]), 1), X.shape[1]))
    frac = float(min(max(params["sample.fraction"], 1.0 / X.shape[0]), 1.0))
    forest = RandomForestClassifier(
        n_estimators=RANGER_TREES,
        criterion="gini",
        max_features=mtry,
        max_depth=RANGER_MAX_DEPTH,
        bootstrap=True,
        max_samples=frac,
        random_state=_seed(rng),
        n_jobs=1,
    )
    forest.fit(X, y)
    m.state["forest"] = forest


def _predict_ranger(m: FittedModel, X) -> np.ndarray:
    forest = m.state["forest"]
    proba = np.zeros((X.shape[0], m.class_count))
    proba[:, forest.classes_] = forest.predict_proba(X)
    return _first_max(proba)


# --- xgboost -------------------------------------------------------------

def _boost_one(X, t, params, rng) -> list[tuple[DecisionTreeRegressor, np.ndarray, np.ndarray]]:
    """Newton boosting for one binary target; returns (tree, columns, leaf values) per round."""
    n, p = X.shape
    eta = float(params["eta"])
    depth = int(min(max(round(params["max_depth"]), 1), 15))
    n_rows = max(1, int(round(params["subsample"] * n)))
    n_cols = max(1, math.ceil(params["colsample_bytree"] * p - 1e-9))
    mcw = float(params["min_child_weight"])
    F = np.zeros(n)
    rounds = []
    for _ in range(XGB_ROUNDS):
        prob = expit(F)
        g = prob - t
        h = np.maximum(prob * (1 - prob), 1e-6)
        rows = np.sort(rng.choice(n, n_rows, replace=False))
        cols = np.sort(rng.choice(p, n_cols, replace=False))
        hs = h[rows]
        tree = DecisionTreeRegressor(
            max_depth=depth,
            min_weight_fraction_leaf=min(0.5, mcw / hs.sum()),
            random_state=_seed(rng),
        )
        tree.fit(X[np.ix_(rows, cols)], -g[rows] / hs, sample_weight=hs)
        # second-order leaf weights with L2 penalty, as in xgboost
        leaf = tree.apply(X[np.ix_(rows, cols)])
        G = np.bincount(leaf, weights=g[rows], minlength=tree.tree_.node_count)
        H = np.bincount(leaf, weights=hs, minlength=tree.tree_.node_count)
        values = -G / (H + XGB_LAMBDA)
        F += eta * values[tree.apply(X[:, cols])]
        rounds.append((tree, cols, values))
    return rounds


def _boost_margin(rounds, X, eta) -> np.ndarray:
    F = np.zeros(X.shape[0])
    for tree, cols, values in rounds:
        F += eta * values[tree.apply(X[:, cols])]
    return F


def _fit_xgboost(m: FittedModel, X, y, params, rng) -> None:
    targets = [1] if m.class_count == 2 else range(m.class_count)
    m.state["eta"] = float(params["eta"])
    m.state["models"] = [(c, _boost_one(X, (y == c).astype(float), params, rng)) for c in targets]


def _predict_xgboost(m: FittedModel, X) -> np.ndarray:
    eta = m.state["eta"]
    if m.class_count == 2:
        (_, rounds), = m.state["models"]
        return (_boost_margin(rounds, X, eta) > 0).astype(int)
    margins = np.column_stack([_boost_margin(r, X, eta) for _, r in m.state["models"]])
    return _first_max(margins)


_FIT = {
    "kknn": _fit_kknn,
    "ksvm": _fit_ksvm,
    "ranger": _fit_ranger,
    "xgboost": _fit_xgboost,
    "naiveBayes": _fit_nb,
}
_PREDICT = {
    "kknn": _predict_kknn,
    "ksvm": _predict_ksvm,
    "ranger": _predict_ranger,
    "xgboost": _predict_xgboost,
    "naiveBayes": _predict_nb,
}
LEARNERS = tuple(_FIT)


def fit_model(
    name: str,
    params: dict[str, float],
    X: np.ndarray,
    y: np.ndarray,
    class_count: int,
    rng: np.random.Generator,
) -> FittedModel:
    """Fit learner ``name``; a single-class training set yields a flagged constant model."""
    if name not in _FIT:
        raise ContractViolation(f"unknown learner {name!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    m = FittedModel(name, X.shape[1], class_count)
    present = np.unique(y)
    if present.size < 2:
        m.degenerate = True
        m.state["label"] = int(present[0]) if present.size else 0
        return m
    _FIT[name](m, X, y, params, rng)
    return m


def predict(model: FittedModel, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


def constant_model(label: int, n_features: int, class_count: int) -> FittedModel:
    return FittedModel("constant", n_features, class_count, {"label": int(label)}, degenerate=True)
