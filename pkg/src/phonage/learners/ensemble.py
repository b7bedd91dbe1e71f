"""Random forest and AdaBoost.R2 ensembles over CART trees.

The forest averages trees fit on bootstrap resamples with per-node
feature subsampling. AdaBoost.R2 (Drucker's formulation, linear loss)
trains each round on a weighted resample of the data, rescales example
weights by beta^(1 - normalized loss), and predicts with the weighted
median of member outputs using member weights ln(1/beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError
from ..rng import child_rng, derive_seed
from .tree import RegressionTree, fit_tree

# Stand-in weight for a member with (near-)zero boosting loss; the
# weighted median then follows that member.
_PERFECT_LOSS = 1e-12


def weighted_median(values, weights) -> float:
    """First value, in ascending order, whose cumulative weight reaches
    half of the total weight."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(values[order[idx]])


def _weighted_median_columns(P, weights) -> np.ndarray:
    """Weighted median down axis 0 of a (members x samples) matrix."""
    order = np.argsort(P, axis=0, kind="stable")
    w = np.asarray(weights, dtype=float)[:, None]
    cum = np.cumsum(np.take_along_axis(np.broadcast_to(w, P.shape), order, axis=0), axis=0)
    pick = np.argmax(cum >= 0.5 * cum[-1, :], axis=0)
    sorted_P = np.take_along_axis(P, order, axis=0)
    return sorted_P[pick, np.arange(P.shape[1])]


@dataclass
class RandomForest:
    trees: list
    n_features: int
    params: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        preds = np.stack([t.predict(X) for t in self.trees])
        return preds.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "n_features": self.n_features,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d) -> "RandomForest":
        return cls(
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            params=d.get("params", {}),
        )


def fit_forest(
    X,
    y,
    *,
    n_trees=10,
    max_depth=3,
    min_leaf=1,
    feature_subsample="auto",
    bootstrap=True,
    seed=0,
) -> RandomForest:
    """Bootstrap forest; ``feature_subsample="auto"`` draws ceil(d/3)
    features per node."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if feature_subsample == "auto":
        k_feats = max(1, math.ceil(d / 3))
    else:
        k_feats = feature_subsample  # None or explicit int
    trees = []
    for t in range(n_trees):
        rng = child_rng(seed, "forest", t)
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            Xt, yt = X[idx], y[idx]
        else:
            Xt, yt = X, y
        trees.append(
            fit_tree(
                Xt,
                yt,
                max_depth=max_depth,
                min_leaf=min_leaf,
                feature_subsample=k_feats if (k_feats is not None and k_feats < d) else None,
                rng=rng,
            )
        )
    return RandomForest(
        trees=trees,
        n_features=d,
        params={
            "n_trees": n_trees,
            "max_depth": max_depth,
            "min_leaf": min_leaf,
            "feature_subsample": feature_subsample,
            "bootstrap": bootstrap,
            "seed": seed,
        },
    )


@dataclass
class AdaBoostR2:
    members: list  # RegressionTree or RandomForest
    member_weights: list  # ln(1/beta_t), all > 0
    n_features: int
    params: dict = field(default_factory=dict)
    # Per-round diagnostics kept in memory for verification; not serialized.
    trace: list = field(default_factory=list, repr=False)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"adaboost expects {self.n_features} features, got {X.shape[1]}")
        P = np.stack([m.predict(X) for m in self.members])
        if len(self.members) == 1:
            return P[0]
        return _weighted_median_columns(P, np.asarray(self.member_weights))

    def to_dict(self) -> dict:
        return {
            "members": [
                {"kind": "forest" if isinstance(m, RandomForest) else "tree", "model": m.to_dict()}
                for m in self.members
            ],
            "member_weights": list(self.member_weights),
            "n_features": self.n_features,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d) -> "AdaBoostR2":
        members = []
        for entry in d["members"]:
            if entry["kind"] == "forest":
                members.append(RandomForest.from_dict(entry["model"]))
            else:
                members.append(RegressionTree.from_dict(entry["model"]))
        return cls(
            members=members,
            member_weights=[float(v) for v in d["member_weights"]],
            n_features=int(d["n_features"]),
            params=d.get("params", {}),
        )


def fit_adaboost_r2(
    X,
    y,
    *,
    n_rounds=10,
    base="forest",
    base_params=None,
    loss="linear",
    seed=0,
) -> AdaBoostR2:
    """Drucker's AdaBoost.R2 with linear loss.

    Each round resamples the training set with replacement in proportion
    to the example weights (stream keyed by (seed, round)), fits the base
    learner, and updates weights with ``w_i *= beta^(1 - L_i)`` where
    ``L_i = |e_i| / max|e|`` and ``beta = Lbar / (1 - Lbar)``. Boosting
    stops when ``Lbar >= 0.5``; a first round at or above that threshold,
    or a perfect first fit, is kept as the single member.
    """
    if loss != "linear":
        raise ConfigError(f"unsupported adaboost loss {loss!r}")
    if base not in ("tree", "forest"):
        raise ConfigError(f"unsupported adaboost base {base!r}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < 2:
        raise DataError("adaboost needs at least two rows")
    base_params = dict(base_params or {})

    def fit_base(Xr, yr, round_idx):
        if base == "tree":
            params = {"max_depth": 3, "min_leaf": 1}
            params.update(base_params)
            return fit_tree(Xr, yr, **params)
        params = {"n_trees": 10, "max_depth": 3, "min_leaf": 1}
        params.update(base_params)
        return fit_forest(Xr, yr, seed=derive_seed(seed, "adaboost-base", round_idx), **params)

    w = np.full(n, 1.0 / n)
    members = []
    member_weights = []
    trace = []
    for t in range(n_rounds):
        rng = child_rng(seed, "adaboost", t)
        idx = rng.choice(n, size=n, replace=True, p=w)
        member = fit_base(X[idx], y[idx], t)
        pred = member.predict(X)
        err = np.abs(pred - y)
        err_max = err.max()
        if err_max <= 0.0:
            members.append(member)
            member_weights.append(math.log(1.0 / _PERFECT_LOSS))
            trace.append(
                {"round": t, "resample": idx, "weights_in": w.copy(), "avg_loss": 0.0, "beta": 0.0}
            )
            break
        L = err / err_max
        avg_loss = float(np.dot(w, L))
        if avg_loss >= 0.5:
            if not members:
                beta = avg_loss / (1.0 - avg_loss) if avg_loss < 1.0 else 1.0 / _PERFECT_LOSS
                members.append(member)
                member_weights.append(max(math.log(1.0 / beta), _PERFECT_LOSS))
                trace.append(
                    {
                        "round": t,
                        "resample": idx,
                        "weights_in": w.copy(),
                        "avg_loss": avg_loss,
                        "beta": beta,
                    }
                )
            break
        beta = avg_loss / (1.0 - avg_loss)
        members.append(member)
        member_weights.append(math.log(1.0 / beta))
        trace.append(
            {
                "round": t,
                "resample": idx,
                "weights_in": w.copy(),
                "avg_loss": avg_loss,
                "beta": beta,
            }
        )
        w = w * beta ** (1.0 - L)
        w = w / w.sum()
    return AdaBoostR2(
        members=members,
        member_weights=member_weights,
        n_features=d,
        params={
            "n_rounds": n_rounds,
            "base": base,
            "base_params": base_params,
            "loss": loss,
            "seed": seed,
        },
        trace=trace,
    )
