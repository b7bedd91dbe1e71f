"""Feature standardization and the mean-prediction baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

STD_FLOOR = 1e-8


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # floored, never zero

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataError("standardizer needs a 2-D matrix with at least one row")
        std = X.std(axis=0)
        return cls(mean=X.mean(axis=0), std=np.maximum(std, STD_FLOOR))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.mean.shape[0]:
            raise DataError(
                f"standardizer dimension mismatch: fitted {self.mean.shape[0]}, got {X.shape[-1]}"
            )
        return (X - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "Standardizer":
        return cls(mean=np.asarray(d["mean"], float), std=np.asarray(d["std"], float))


@dataclass
class MeanBaseline:
    """Predicts the arithmetic mean of the training targets."""

    value: float
    n_features: int | None = field(default=None)

    @classmethod
    def fit(cls, y, n_features=None) -> "MeanBaseline":
        y = np.asarray(y, dtype=float)
        if y.size < 1:
            raise DataError("baseline needs at least one target")
        return cls(value=float(y.mean()), n_features=n_features)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        n = X.shape[0] if X.ndim == 2 else 1
        if self.n_features is not None and X.ndim == 2 and X.shape[1] != self.n_features:
            raise DataError("baseline feature dimension mismatch")
        return np.full(n, self.value)

    def to_dict(self) -> dict:
        return {"value": self.value, "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d) -> "MeanBaseline":
        return cls(value=float(d["value"]), n_features=d.get("n_features"))


def fit_standardizer(X) -> Standardizer:
    return Standardizer.fit(X)


def fit_mean_baseline(y) -> MeanBaseline:
    return MeanBaseline.fit(y)
