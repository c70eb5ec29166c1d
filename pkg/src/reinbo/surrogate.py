"""Gaussian-process surrogate and expected-improvement acquisition.

Inputs live in the unit hypercube. The GP uses a constant prior mean (the
mean of the observations) and an ARD squared-exponential kernel. Kernel
hyperparameters are either fixed or picked by coordinate search of the log
marginal likelihood over a log-spaced grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import norm

from reinbo.errors import ContractViolation, InputError, NumericalError

JITTER_START = 1e-10
JITTER_MAX = 1e-4
_LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class HyperPolicy:
    """How kernel hyperparameters are chosen at fit time.

    With ``optimize=False`` the given lengthscale / signal variance are used
    as-is (``signal_var=None`` means the sample variance of y).
    """

    noise_var: float = 1e-4
    optimize: bool = True
    lengthscale: float = 0.3
    signal_var: float | None = None
    min_points_to_optimize: int = 4
    lengthscale_grid: tuple[float, ...] = tuple(np.round(np.logspace(-1.7, 0.6, 12), 6))
    signal_factors: tuple[float, ...] = (0.1, 0.3, 1.0, 3.0, 10.0)
    starts: tuple[float, ...] = (0.1, 0.3, 1.0)
    max_sweeps: int = 3


@dataclass(frozen=True)
class Design:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ContractViolation(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
        if not np.all(np.isfinite(y)):
            raise InputError("design contains non-finite y")
        if X.size and (X.min() < 0 or X.max() > 1):
            raise ContractViolation("design points must lie in [0, 1]^d")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (d, len(A), len(B))."""
    return (A.T[:, :, None] - B.T[:, None, :]) ** 2


def _cholesky_with_jitter(K: np.ndarray, base_noise: float) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    jitter = 0.0
    while True:
        try:
            L = cholesky(K + (base_noise + jitter) * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 2
            if jitter > JITTER_MAX:
                raise NumericalError("covariance not positive definite after maximum jitter")


def _log_marginal(D: np.ndarray, yc: np.ndarray, ls: np.ndarray, sf2: float, noise: float) -> float:
    K = sf2 * np.exp(-0.5 * np.tensordot(1.0 / ls**2, D, axes=1))
    try:
        L, _ = _cholesky_with_jitter(K, noise)
    except NumericalError:
        return -np.inf
    a = cho_solve((L, True), yc)
    return float(-0.5 * yc @ a - np.log(np.diag(L)).sum() - 0.5 * len(yc) * _LOG_2PI)


class GpSurrogate:
    """Exact GP regression fitted by Cholesky factorisation. Immutable after fit."""

    def __init__(
        self,
        design: Design,
        lengthscales: np.ndarray,
        signal_var: float,
        noise_var: float,
    ) -> None:
        self.design = design
        self.lengthscales = np.asarray(lengthscales, dtype=float)
        self.signal_var = float(signal_var)
        self.noise_var = float(noise_var)
        self.mean = float(design.y.mean())
        K = self._kernel(design.X, design.X)
        self._L, self.jitter = _cholesky_with_jitter(K, self.noise_var)
        self._alpha = cho_solve((self._L, True), design.y - self.mean)

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        D = _sq_dists(A, B)
        return self.signal_var * np.exp(-0.5 * np.tensordot(1.0 / self.lengthscales**2, D, axes=1))

    @property
    def d(self) -> int:
        return self.design.d

    def predict(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and latent variance (clamped at 0) for the rows of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ContractViolation(f"query has dimension {X.shape[1]}, model has {self.d}")
        Ks = self._kernel(self.design.X, X)
        mu = self.mean + Ks.T @ self._alpha
        v = solve_triangular(self._L, Ks, lower=True)
        var = self.signal_var - np.einsum("ij,ij->j", v, v)
        return mu, np.maximum(var, 0.0)

    def log_marginal_likelihood(self) -> float:
        yc = self.design.y - self.mean
        return float(
            -0.5 * yc @ self._alpha - np.log(np.diag(self._L)).sum() - 0.5 * len(yc) * _LOG_2PI
        )


def _choose_hyperparameters(
    design: Design, policy: HyperPolicy, warm_start: tuple[np.ndarray, float] | None = None
) -> tuple[np.ndarray, float]:
    d = design.d
    y_var = float(design.y.var())
    base_sf2 = max(y_var, 1e-6)
    if not policy.optimize or design.n < policy.min_points_to_optimize:
        sf2 = base_sf2 if policy.signal_var is None else policy.signal_var
        return np.full(d, policy.lengthscale), sf2

    D = _sq_dists(design.X, design.X)
    yc = design.y - design.y.mean()
    grid = np.asarray(policy.lengthscale_grid)
    sf2_grid = base_sf2 * np.asarray(policy.signal_factors)
    best = (-np.inf, np.full(d, policy.lengthscale), base_sf2)
    starts = [(np.full(d, float(s)), base_sf2) for s in policy.starts]
    if warm_start is not None:
        starts.insert(0, (np.asarray(warm_start[0], dtype=float), float(warm_start[1])))
    for ls, sf2 in starts:
        cur = _log_marginal(D, yc, ls, sf2, policy.noise_var)
        for _ in range(policy.max_sweeps):
            changed = False
            for k in range(d):
                for g in grid:
                    if g == ls[k]:
                        continue
                    trial = ls.copy()
                    trial[k] = g
                    val = _log_marginal(D, yc, trial, sf2, policy.noise_var)
                    if val > cur + 1e-12:
                        cur, ls, changed = val, trial, True
            for s in sf2_grid:
                val = _log_marginal(D, yc, ls, s, policy.noise_var)
                if val > cur + 1e-12:
                    cur, sf2, changed = val, float(s), True
            if not changed:
                break
        if cur > best[0]:
            best = (cur, ls, sf2)
    return best[1], best[2]


def fit(
    design: Design,
    policy: HyperPolicy | None = None,
    warm_start: tuple[np.ndarray, float] | None = None,
) -> GpSurrogate:
    """Fit a GP; ``warm_start`` (lengthscales, signal variance) adds one search start."""
    policy = policy or HyperPolicy()
    if design.n < 1 or design.d < 1:
        raise ContractViolation("fit needs n >= 1 points of dimension d >= 1")
    ls, sf2 = _choose_hyperparameters(design, policy, warm_start)
    return GpSurrogate(design, ls, sf2, policy.noise_var)


def refit(model: GpSurrogate, design: Design) -> GpSurrogate:
    """Same kernel hyperparameters, new data."""
    return GpSurrogate(design, model.lengthscales, model.signal_var, model.noise_var)


def posterior(model: GpSurrogate, x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.d:
        raise ContractViolation(f"query has dimension {x.shape[0]}, model has {model.d}")
    mu, var = model.predict(x[None, :])
    return float(mu[0]), float(var[0])


def ei_from_moments(mu, sigma, y_best):
    """Expected improvement for maximisation, vectorised over mu / sigma."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - y_best
    safe = np.where(sigma > 0, sigma, 1.0)
    # tiny sigma sends z to +-inf, where the formula still has the right limit
    with np.errstate(over="ignore", divide="ignore"):
        z = gap / safe
        ei = gap * norm.cdf(z) + safe * norm.pdf(z)
    ei = np.where(sigma > 0, ei, np.maximum(gap, 0.0))
    return np.maximum(ei, 0.0)


def expected_improvement(model: GpSurrogate, x, y_best: float):
    """EI at one point (1-D x) or at each row of a 2-D array."""
    x = np.asarray(x, dtype=float)
    mu, var = model.predict(np.atleast_2d(x))
    ei = ei_from_moments(mu, np.sqrt(var), y_best)
    return float(ei[0]) if x.ndim == 1 else ei


def argmax_ei(model: GpSurrogate, candidates: np.ndarray, y_best: float) -> np.ndarray:
    candidates = np.atleast_2d(candidates)
    ei = expected_improvement(model, candidates, y_best)
    return candidates[int(np.argmax(ei))].copy()


def propose_point(
    model: GpSurrogate,
    y_best: float,
    rng: np.random.Generator,
    n_candidates: int | None = None,
) -> np.ndarray:
    """EI-argmax over uniformly random candidates (1000 * d by default)."""
    n = n_candidates or 1000 * model.d
    return argmax_ei(model, rng.random((n, model.d)), y_best)


def initial_design(d: int, n_init: int, rng: np.random.Generator) -> np.ndarray:
    """Latin hypercube sample of ``n_init`` points in [0, 1]^d."""
    if n_init < 1:
        raise ContractViolation("n_init must be >= 1")
    strata = np.column_stack([rng.permutation(n_init) for _ in range(d)]) if d else np.empty((n_init, 0))
    return (strata + rng.random((n_init, d))) / n_init
