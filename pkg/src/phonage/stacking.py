"""Two-layer stacked age regressor.

Layer one trains an independent base estimator per phoneme category on
that category's eight duration functionals. Layer two trains a meta
estimator of the same model class on out-of-fold (OOF) base predictions:
the meta matrix cell M[s, c] is the prediction for speaker s by the
category-c base model trained only on folds that exclude s. Cells for
absent categories, and cells whose fold-training side has fewer than two
present speakers, are imputed with the mean age of the fold's training
speakers. After the OOF pass the base models are refit on all training
speakers for deployment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .functionals import FeatureMatrix, N_FUNCTIONALS
from .learners import (
    AdaBoostR2,
    Standardizer,
    SvrModel,
    config_fingerprint,
    fit_adaboost_r2,
    fit_svr,
)
from .rng import derive_seed, fold_assignments

log = logging.getLogger(__name__)

MODEL_CLASSES = ("svr", "adaboost")

# Fixed hyperparameters for the per-category base estimators. Only the
# meta estimator is tuned; grid-searching hundreds of base models inside
# leave-one-speaker-out would be prohibitive.
BASE_DEFAULTS = {
    "svr": {"C": 1.0, "epsilon": 0.3, "gamma": None},
    "adaboost": {
        "n_rounds": 4,
        "base": "forest",
        "base_params": {"n_trees": 2, "max_depth": 2, "min_leaf": 2},
    },
}

META_DEFAULTS = {
    "svr": {"C": 10.0, "epsilon": 0.3, "gamma": None},
    "adaboost": {
        "n_rounds": 10,
        "base": "forest",
        "base_params": {"n_trees": 3, "max_depth": 3, "min_leaf": 2},
    },
}

DEFAULT_META_FOLDS = 5

FORMAT = "phonage-stacked-model"
VERSION = 1


@dataclass
class CategoryEstimator:
    key: str
    standardizer: Standardizer
    model: object  # SvrModel or AdaBoostR2
    imputation: float  # mean training age, used when the category is absent


@dataclass
class StackedModel:
    model_class: str
    categories: tuple  # retained inventory keys, in inventory order
    bases: list  # CategoryEstimator per category
    meta_standardizer: Standardizer
    meta_model: object
    meta_folds: int
    seed: int
    config: dict
    dropped: tuple = ()
    oof_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def fingerprint(self) -> str:
        return config_fingerprint(self.config)

    def convergence_warnings(self) -> int:
        models = [b.model for b in self.bases] + [self.meta_model]
        return sum(1 for m in models if isinstance(m, SvrModel) and not m.converged)


def _resolve_config(model_class, base_params, meta_params, meta_folds, seed) -> dict:
    if model_class not in MODEL_CLASSES:
        raise ConfigError(f"model_class must be one of {MODEL_CLASSES}, got {model_class!r}")
    base = json.loads(json.dumps(BASE_DEFAULTS[model_class]))
    base.update(base_params or {})
    meta = json.loads(json.dumps(META_DEFAULTS[model_class]))
    meta.update(meta_params or {})
    if meta_folds < 2:
        raise ConfigError("meta_folds must be >= 2")
    return {
        "model_class": model_class,
        "base_params": base,
        "meta_params": meta,
        "meta_folds": int(meta_folds),
        "seed": int(seed),
    }


def _fit_base(model_class, X, y, params, seed_parts):
    st = Standardizer.fit(X)
    Xs = st.transform(X)
    if model_class == "svr":
        kw = dict(params)
        # grids state gamma as a multiple of 1/d so entries stay dimension-free
        scale = kw.pop("gamma_scale", None)
        if scale is not None and kw.get("gamma") is None:
            kw["gamma"] = scale / X.shape[1]
        model = fit_svr(Xs, y, **kw)
    else:
        model = fit_adaboost_r2(Xs, y, seed=derive_seed(*seed_parts), **params)
    return st, model


def build_oof_matrix(features: FeatureMatrix, config: dict) -> np.ndarray:
    """Out-of-fold meta matrix, speakers x categories.

    Fold membership is a keyed hash of the speaker id, so the matrix is
    independent of speaker ordering, and row s depends only on speaker
    s's own features plus models trained on folds excluding s.
    """
    n = features.n_speakers
    keys = features.inventory.keys
    meta_folds = config["meta_folds"]
    seed = config["seed"]
    if n < meta_folds + 1:
        raise DataError(f"need at least meta_folds + 1 = {meta_folds + 1} speakers, got {n}")
    folds = fold_assignments(features.speaker_ids, meta_folds, seed, "oof")
    fold_idx = np.array([folds[s] for s in features.speaker_ids])
    ages = features.ages

    M = np.empty((n, len(keys)))
    for f in range(meta_folds):
        val_rows = np.nonzero(fold_idx == f)[0]
        train_rows = np.nonzero(fold_idx != f)[0]
        if val_rows.size == 0:
            continue
        fold_mean_age = float(ages[train_rows].mean())
        for c, key in enumerate(keys):
            block = features.block(c)
            train_present = train_rows[features.present[train_rows, c]]
            val_present = val_rows[features.present[val_rows, c]]
            M[val_rows, c] = fold_mean_age
            if train_present.size < 2 or val_present.size == 0:
                continue
            st, model = _fit_base(
                config["model_class"],
                block[train_present],
                ages[train_present],
                config["base_params"],
                (seed, "base", c, f),
            )
            M[val_present, c] = model.predict(st.transform(block[val_present]))
    return M


def fit_stacked(
    features: FeatureMatrix,
    *,
    model_class: str,
    seed: int = 0,
    meta_folds: int = DEFAULT_META_FOLDS,
    base_params: dict | None = None,
    meta_params: dict | None = None,
    oof_matrix: np.ndarray | None = None,
    keep_oof: bool = False,
) -> StackedModel:
    """Fit base estimators, the OOF meta matrix, and the meta estimator.

    ``oof_matrix`` accepts a matrix previously produced by
    :func:`build_oof_matrix` under the same features and config (used by
    the evaluation harness to avoid rebuilding it after tuning).
    """
    config = _resolve_config(model_class, base_params, meta_params, meta_folds, seed)

    totally_absent = [
        key for c, key in enumerate(features.inventory.keys) if not features.present[:, c].any()
    ]
    if totally_absent:
        log.warning("dropping categories absent for every speaker: %s", totally_absent)
    keep = [c for c, key in enumerate(features.inventory.keys) if key not in set(totally_absent)]
    if not keep:
        raise DataError("no category is present for any speaker")
    sub = _subset_categories(features, keep)

    if oof_matrix is None:
        M = build_oof_matrix(sub, config)
    else:
        M = np.asarray(oof_matrix, dtype=float)
        if M.shape != (sub.n_speakers, len(sub.inventory)):
            raise DataError("precomputed OOF matrix shape mismatch")

    meta_st, meta_model = _fit_base(
        model_class, M, sub.ages, config["meta_params"], (seed, "meta")
    )

    imputation = float(sub.ages.mean())
    bases = []
    for c, key in enumerate(sub.inventory.keys):
        rows = np.nonzero(sub.present[:, c])[0]
        st, model = _fit_base(
            model_class,
            sub.block(c)[rows],
            sub.ages[rows],
            config["base_params"],
            (seed, "base", c, "full"),
        )
        bases.append(CategoryEstimator(key=key, standardizer=st, model=model, imputation=imputation))

    return StackedModel(
        model_class=model_class,
        categories=tuple(sub.inventory.keys),
        bases=bases,
        meta_standardizer=meta_st,
        meta_model=meta_model,
        meta_folds=config["meta_folds"],
        seed=seed,
        config=config,
        dropped=tuple(totally_absent),
        oof_matrix=M if keep_oof else None,
    )


def _subset_categories(features: FeatureMatrix, keep) -> FeatureMatrix:
    from .phones import PhoneInventory

    keep = list(keep)
    if len(keep) == len(features.inventory):
        return features
    cols = []
    for c in keep:
        cols.extend(range(c * N_FUNCTIONALS, (c + 1) * N_FUNCTIONALS))
    return FeatureMatrix(
        speaker_ids=features.speaker_ids,
        inventory=PhoneInventory(
            keys=tuple(features.inventory.keys[c] for c in keep),
            with_stress=features.inventory.with_stress,
            min_speaker_fraction=features.inventory.min_speaker_fraction,
        ),
        values=features.values[:, cols],
        present=features.present[:, keep],
        ages=features.ages,
        age_unit=features.age_unit,
    )


def predict_stacked(model: StackedModel, features: FeatureMatrix) -> np.ndarray:
    """Predict ages for every speaker in ``features``.

    The feature inventory must contain every category the model was
    trained on; extra categories are ignored.
    """
    key_to_col = {key: c for c, key in enumerate(features.inventory.keys)}
    missing = [k for k in model.categories if k not in key_to_col]
    if missing:
        raise DataError(f"feature layout mismatch; missing categories: {missing[:5]}")
    n = features.n_speakers
    P = np.empty((n, len(model.categories)))
    for c, est in enumerate(model.bases):
        col = key_to_col[est.key]
        P[:, c] = est.imputation
        rows = np.nonzero(features.present[:, col])[0]
        if rows.size:
            block = features.block(col)[rows]
            P[rows, c] = est.model.predict(est.standardizer.transform(block))
    return model.meta_model.predict(model.meta_standardizer.transform(P))


# --- serialization ---------------------------------------------------------


def stacked_to_envelope(model: StackedModel) -> dict:
    from .learners.persist import model_to_envelope

    return {
        "format": FORMAT,
        "version": VERSION,
        "model_class": model.model_class,
        "config": model.config,
        "config_fingerprint": model.fingerprint,
        "meta_folds": model.meta_folds,
        "seed": model.seed,
        "categories": list(model.categories),
        "dropped": list(model.dropped),
        "imputation": [b.imputation for b in model.bases],
        "base_standardizers": [b.standardizer.to_dict() for b in model.bases],
        "base_models": [model_to_envelope(b.model, model.config) for b in model.bases],
        "meta_standardizer": model.meta_standardizer.to_dict(),
        "meta_model": model_to_envelope(model.meta_model, model.config),
    }


def stacked_from_envelope(doc: dict) -> StackedModel:
    from .learners.persist import model_from_envelope

    if doc.get("format") != FORMAT:
        raise DataError(f"not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported stacked model version {doc.get('version')!r}")
    bases = []
    for key, st, env, imp in zip(
        doc["categories"], doc["base_standardizers"], doc["base_models"], doc["imputation"]
    ):
        bases.append(
            CategoryEstimator(
                key=key,
                standardizer=Standardizer.from_dict(st),
                model=model_from_envelope(env),
                imputation=float(imp),
            )
        )
    return StackedModel(
        model_class=doc["model_class"],
        categories=tuple(doc["categories"]),
        bases=bases,
        meta_standardizer=Standardizer.from_dict(doc["meta_standardizer"]),
        meta_model=model_from_envelope(doc["meta_model"]),
        meta_folds=int(doc["meta_folds"]),
        seed=int(doc["seed"]),
        config=doc["config"],
        dropped=tuple(doc.get("dropped", ())),
    )


def save_stacked(model: StackedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stacked_to_envelope(model), fh, sort_keys=True)
        fh.write("\n")


def load_stacked(path) -> StackedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return stacked_from_envelope(json.load(fh))
