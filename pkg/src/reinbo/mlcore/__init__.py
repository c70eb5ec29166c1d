"""Desk-scale ML execution: datasets, operators, learners, resampling, scoring."""

from reinbo.mlcore.data import Dataset, load_csv, make_synthetic
from reinbo.mlcore.evaluate import (
    CVEvaluator,
    FittedPipeline,
    cross_validate,
    evaluate_cv5,
    fit_pipeline,
    mmce,
)
from reinbo.mlcore.learners import FittedModel, fit_model, predict
from reinbo.mlcore.resampling import ResamplingPlan, make_stratified_folds
from reinbo.mlcore.transforms import FittedTransform, apply_transform, fit_transform

__all__ = [
    "CVEvaluator",
    "Dataset",
    "FittedModel",
    "FittedPipeline",
    "FittedTransform",
    "ResamplingPlan",
    "apply_transform",
    "cross_validate",
    "evaluate_cv5",
    "fit_model",
    "fit_pipeline",
    "fit_transform",
    "load_csv",
    "make_stratified_folds",
    "make_synthetic",
    "mmce",
    "predict",
]
