"""Fitting configured pipelines and scoring them by cross-validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from reinbo.errors import ContractViolation
from reinbo.grammar import LEARNER, NOOP, ConfiguredPipeline, PipelineGrammar
from reinbo.mlcore.data import Dataset
from reinbo.mlcore.learners import FittedModel, fit_model
from reinbo.mlcore.resampling import ResamplingPlan
from reinbo.mlcore.transforms import FittedTransform, fit_transform


@dataclass(frozen=True)
class FittedPipeline:
    transforms: tuple[FittedTransform, ...]
    model: FittedModel

    def predict(self, X: np.ndarray) -> np.ndarray:
        for t in self.transforms:
            X = t.apply(X)
        return self.model.predict(X)


def fit_pipeline(
    grammar: PipelineGrammar,
    configured: ConfiguredPipeline,
    train: Dataset,
    rng: np.random.Generator,
) -> FittedPipeline:
    X, y = train.X, train.y
    transforms = []
    model = None
    for stage, op in enumerate(grammar.operations_of(configured.pipeline), start=1):
        params = configured.op_params(stage)
        if op.kind == LEARNER:
            model = fit_model(op.name, params, X, y, train.class_count, rng)
        else:
            t, X = fit_transform("NA" if op.kind == NOOP else op.name, params, X, y)
            transforms.append(t)
    if model is None:
        raise ContractViolation("pipeline has no learner")
    return FittedPipeline(tuple(transforms), model)


@dataclass
class CVResult:
    accuracy: float
    predictions: np.ndarray
    degenerate_folds: list[int] = field(default_factory=list)

    @property
    def mmce(self) -> float:
        return 1.0 - self.accuracy


def _fold_rng(seed: int, fold: int) -> np.random.Generator:
    return np.random.default_rng([seed, fold])


def cross_validate(
    grammar: PipelineGrammar,
    configured: ConfiguredPipeline,
    data: Dataset,
    plan: ResamplingPlan,
    seed: int = 0,
) -> CVResult:
    """Pooled held-out accuracy; transforms and model see only the training folds."""
    if plan.n_obs != data.n_obs:
        raise ContractViolation(f"plan covers {plan.n_obs} rows, dataset has {data.n_obs}")
    pred = np.full(data.n_obs, -1, dtype=int)
    degenerate = []
    for fold, (tr, te) in enumerate(plan.splits(), start=1):
        if te.size == 0:
            continue
        fitted = fit_pipeline(grammar, configured, data.subset(tr), _fold_rng(seed, fold))
        if fitted.model.degenerate:
            degenerate.append(fold)
        pred[te] = fitted.predict(data.X[te])
    scored = pred >= 0
    acc = float(np.mean(pred[scored] == data.y[scored]))
    return CVResult(acc, pred, degenerate)


def evaluate_cv5(
    grammar: PipelineGrammar,
    configured: ConfiguredPipeline,
    data: Dataset,
    plan: ResamplingPlan,
    seed: int = 0,
) -> float:
    return cross_validate(grammar, configured, data, plan, seed).accuracy


def mmce(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    return float(np.mean(np.asarray(y_true) != np.asarray(y_pred)))


class CVEvaluator:
    """Callable evaluator for the search loops; counts its own invocations."""

    def __init__(self, grammar: PipelineGrammar, data: Dataset, plan: ResamplingPlan, seed: int = 0):
        self.grammar = grammar
        self.data = data
        self.plan = plan
        self.seed = seed
        self.calls = 0
        self.degenerate_evaluations = 0

    def __call__(self, configured: ConfiguredPipeline) -> float:
        self.calls += 1
        res = cross_validate(self.grammar, configured, self.data, self.plan, self.seed)
        if res.degenerate_folds:
            self.degenerate_evaluations += 1
        return res.accuracy
