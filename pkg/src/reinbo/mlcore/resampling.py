"""Stratified k-fold resampling plans."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from reinbo.errors import ContractViolation, InputError


@dataclass(frozen=True)
class ResamplingPlan:
    folds: np.ndarray  # fold id 1..k per observation
    k: int
    stratified: bool = True
    seed: int | None = None

    def __post_init__(self) -> None:
        folds = np.asarray(self.folds, dtype=int)
        if folds.size and (folds.min() < 1 or folds.max() > self.k):
            raise ContractViolation("fold ids must lie in 1..k")
        object.__setattr__(self, "folds", folds)

    @property
    def n_obs(self) -> int:
        return self.folds.shape[0]

    def splits(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """(train_idx, test_idx) per fold, in fold order."""
        for f in range(1, self.k + 1):
            test = self.folds == f
            yield np.flatnonzero(~test), np.flatnonzero(test)


def make_stratified_folds(y: np.ndarray, k: int = 5, seed: int = 0) -> ResamplingPlan:
    """Deal each class's shuffled members round-robin over the folds.

    The dealing position carries over from one class to the next so fold
    sizes stay within one observation of each other.
    """
    y = np.asarray(y)
    if k < 2:
        raise ContractViolation("k must be >= 2")
    classes, counts = np.unique(y, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise InputError(
            f"class {small[0]!r} has {counts[counts < k][0]} members, fewer than k={k} folds"
        )
    rng = np.random.default_rng(seed)
    folds = np.empty(y.shape[0], dtype=int)
    pos = int(rng.integers(k))
    for c in classes:
        members = rng.permutation(np.flatnonzero(y == c))
        folds[members] = (pos + np.arange(members.size)) % k + 1
        pos = (pos + members.size) % k
    return ResamplingPlan(folds, k, True, seed)
