"""Impurity-based per-category importance of the stacked meta estimator.

Because each meta input column is one category's base prediction, the
variance-reduction importance of meta-tree split features reads directly
as per-phoneme importance. Tree importances are aggregated across
boosting members weighted by ln(1/beta), then normalized to sum to one.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import UnsupportedModelError
from .learners import AdaBoostR2, RandomForest, RegressionTree
from .stacking import StackedModel

log = logging.getLogger(__name__)


def _member_importance(member, n_features) -> np.ndarray:
    if isinstance(member, RegressionTree):
        return member.feature_importance()
    if isinstance(member, RandomForest):
        if not member.trees:
            return np.zeros(n_features)
        return np.mean([t.feature_importance() for t in member.trees], axis=0)
    raise UnsupportedModelError(f"cannot compute importance of {type(member).__name__}")


def meta_importance(model: StackedModel) -> dict:
    """Map each retained category key to its normalized importance.

    Only tree-based (adaboost) stacked models support this; categories
    the meta estimator never splits on get zero. If no split exists at
    all, the raw zeros are returned unnormalized with a warning.
    """
    if model.model_class != "adaboost" or not isinstance(model.meta_model, AdaBoostR2):
        raise UnsupportedModelError(
            f"importance needs a tree-based meta estimator, got {model.model_class!r}"
        )
    k = len(model.categories)
    total = np.zeros(k)
    for member, weight in zip(model.meta_model.members, model.meta_model.member_weights):
        total += weight * _member_importance(member, k)
    s = total.sum()
    if s <= 0.0:
        log.warning("meta estimator has no splits; importances are all zero")
        return {key: 0.0 for key in model.categories}
    total /= s
    return {key: float(v) for key, v in zip(model.categories, total)}


def top_k(importances: dict, k: int) -> list:
    """Top-k (key, value) pairs, descending by value, ties lexicographic."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[: min(k, len(ranked))]


def write_importance_csv(importances: dict, path) -> None:
    import csv

    from .fileio import format_float

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "importance"])
        for key, value in top_k(importances, max(1, len(importances))):
            writer.writerow([key, format_float(value)])
