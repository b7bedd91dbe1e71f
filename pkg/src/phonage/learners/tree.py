"""CART regression tree with weighted variance-reduction splits.

Split candidates are midpoints between consecutive distinct sorted
feature values. The winning split maximizes the decrease in weighted sum
of squared errors; exact ties go to the lowest feature index, then the
lowest threshold. Rows with ``x <= threshold`` go left. A node becomes a
leaf at the depth limit, below the minimum leaf size, or when its
weighted variance drops to the degeneracy floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

# A node with weighted variance at or below this is treated as pure.
PURITY_FLOOR = 1e-12


@dataclass
class TreeNode:
    value: float  # weighted mean target of the node's training rows
    n_samples: int
    weight: float
    impurity: float  # weighted variance
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    gain: float = 0.0  # impurity decrease achieved by the split
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "n_samples": self.n_samples,
            "weight": self.weight,
            "impurity": self.impurity,
        }
        if not self.is_leaf:
            d.update(
                feature=self.feature,
                threshold=self.threshold,
                gain=self.gain,
                left=self.left.to_dict(),
                right=self.right.to_dict(),
            )
        return d

    @classmethod
    def from_dict(cls, d) -> "TreeNode":
        node = cls(
            value=float(d["value"]),
            n_samples=int(d["n_samples"]),
            weight=float(d["weight"]),
            impurity=float(d["impurity"]),
        )
        if "feature" in d:
            node.feature = int(d["feature"])
            node.threshold = float(d["threshold"])
            node.gain = float(d["gain"])
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


@dataclass
class RegressionTree:
    root: TreeNode
    n_features: int
    params: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"tree expects {self.n_features} features, got {X.shape[1]}")
        out = np.empty(X.shape[0], dtype=float)

        def descend(node, idx):
            if node.is_leaf:
                out[idx] = node.value
                return
            mask = X[idx, node.feature] <= node.threshold
            descend(node.left, idx[mask])
            descend(node.right, idx[~mask])

        descend(self.root, np.arange(X.shape[0]))
        return out

    def feature_importance(self) -> np.ndarray:
        """Per-feature sum of (node weight fraction) x impurity decrease."""
        imp = np.zeros(self.n_features)
        root_weight = self.root.weight

        def walk(node):
            if node.is_leaf:
                return
            imp[node.feature] += (node.weight / root_weight) * node.gain
            walk(node.left)
            walk(node.right)

        walk(self.root)
        return imp

    def internal_nodes(self):
        nodes = []

        def walk(node):
            if node.is_leaf:
                return
            nodes.append(node)
            walk(node.left)
            walk(node.right)

        walk(self.root)
        return nodes

    def leaves(self):
        nodes = []

        def walk(node):
            if node.is_leaf:
                nodes.append(node)
                return
            walk(node.left)
            walk(node.right)

        walk(self.root)
        return nodes

    def to_dict(self) -> dict:
        return {"root": self.root.to_dict(), "n_features": self.n_features, "params": self.params}

    @classmethod
    def from_dict(cls, d) -> "RegressionTree":
        return cls(
            root=TreeNode.from_dict(d["root"]),
            n_features=int(d["n_features"]),
            params=d.get("params", {}),
        )


def _best_split(X, y, w, feature_indices, min_leaf):
    """Return (sse_gain, feature, threshold) of the best split, or None.

    The gain is the decrease in weighted SSE, computed as
    ``sse(node) - sse(left) - sse(right)`` with
    ``sse = sum(w*y^2) - (sum(w*y))^2 / sum(w)``. Dividing by the node
    weight would give the weighted variance reduction; the ranking and
    tie structure are identical. All candidate features are evaluated in
    one pass of column-parallel prefix sums; invalid candidates are
    masked to -inf, and the feature-major argmax realizes the tie rule
    (lowest feature index, then lowest threshold).
    """
    n = y.shape[0]
    if n < 2:
        return None
    W = w.sum()
    S = float(np.dot(w, y))
    Q = float(np.dot(w, y * y))
    sse_node = Q - S * S / W

    Xf = X[:, feature_indices]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    ys = y[order]
    ws = w[order]
    cw = np.cumsum(ws, axis=0)[:-1]
    cwy = np.cumsum(ws * ys, axis=0)[:-1]
    cwyy = np.cumsum(ws * ys * ys, axis=0)[:-1]

    valid = xs[1:] != xs[:-1]
    if min_leaf > 1:
        pos = np.arange(1, n)[:, None]
        valid &= (pos >= min_leaf) & (n - pos >= min_leaf)
    wr = W - cw
    valid &= (cw > 0) & (wr > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = sse_node - (cwyy - cwy * cwy / cw) - ((Q - cwyy) - (S - cwy) * (S - cwy) / wr)
    gains = np.where(valid, gains, -np.inf)

    flat = int(np.argmax(gains.T.reshape(-1)))
    col, row = divmod(flat, n - 1)
    gain = float(gains[row, col])
    if not np.isfinite(gain):
        return None
    thr = float((xs[row, col] + xs[row + 1, col]) / 2.0)
    return (gain, int(feature_indices[col]), thr)


def fit_tree(
    X,
    y,
    weights=None,
    *,
    max_depth=None,
    min_leaf=1,
    feature_subsample=None,
    rng=None,
) -> RegressionTree:
    """Greedy CART fit.

    ``feature_subsample`` limits each node's split search to that many
    features drawn without replacement from ``rng`` (used by forests);
    None searches all features. Weights must be non-negative and not all
    zero; leaf values are weighted target means.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise DataError("X must be 2-D")
    n, d = X.shape
    if y.shape != (n,):
        raise DataError("y length must match X rows")
    if n < 1:
        raise DataError("need at least one row")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or (w < 0).any() or w.sum() <= 0:
            raise DataError("weights must be non-negative and not all zero")
    if feature_subsample is not None:
        feature_subsample = int(feature_subsample)
        if feature_subsample < 1:
            raise DataError("feature_subsample must be >= 1")
        if rng is None:
            raise DataError("feature_subsample requires an rng")

    def build(rows, depth):
        yv = y[rows]
        wv = w[rows]
        W = wv.sum()
        mean = float(np.dot(wv, yv) / W)
        impurity = float(np.dot(wv, (yv - mean) ** 2) / W)
        node = TreeNode(value=mean, n_samples=rows.size, weight=float(W), impurity=impurity)
        if rows.size < 2 * min_leaf or impurity <= PURITY_FLOOR:
            return node
        if max_depth is not None and depth >= max_depth:
            return node
        if feature_subsample is not None and feature_subsample < d:
            feats = np.sort(rng.choice(d, size=feature_subsample, replace=False))
        else:
            feats = np.arange(d)
        found = _best_split(X[rows], yv, wv, feats, min_leaf)
        if found is None or found[0] <= 0.0:
            return node
        gain_sse, f, thr = found
        node.feature = f
        node.threshold = thr
        node.gain = gain_sse / W  # variance units
        mask = X[rows, f] <= thr
        node.left = build(rows[mask], depth + 1)
        node.right = build(rows[~mask], depth + 1)
        return node

    root = build(np.arange(n), 0)
    return RegressionTree(
        root=root,
        n_features=d,
        params={
            "max_depth": max_depth,
            "min_leaf": min_leaf,
            "feature_subsample": feature_subsample,
        },
    )
