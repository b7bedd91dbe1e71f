"""Regression primitives: standardizer, baseline, CART tree, random
forest, AdaBoost.R2, and epsilon-SVR trained by SMO."""

from .core import MeanBaseline, Standardizer, fit_mean_baseline, fit_standardizer
from .ensemble import AdaBoostR2, RandomForest, fit_adaboost_r2, fit_forest, weighted_median
from .persist import (
    config_fingerprint,
    load_model,
    model_from_envelope,
    model_to_envelope,
    save_model,
)
from .svr import SvrModel, dual_objective, fit_svr, rbf_kernel
from .tree import RegressionTree, fit_tree

__all__ = [
    "AdaBoostR2",
    "MeanBaseline",
    "RandomForest",
    "RegressionTree",
    "Standardizer",
    "SvrModel",
    "config_fingerprint",
    "dual_objective",
    "fit_adaboost_r2",
    "fit_forest",
    "fit_mean_baseline",
    "fit_standardizer",
    "fit_svr",
    "fit_tree",
    "load_model",
    "model_from_envelope",
    "model_to_envelope",
    "rbf_kernel",
    "save_model",
    "weighted_median",
]
