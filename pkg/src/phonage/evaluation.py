"""Metrics and the leave-one-speaker-out evaluation harness.

Each speaker is held out once; the remaining speakers train a stacked
model whose meta hyperparameters are chosen by an inner k-fold grid
search over the out-of-fold meta matrix, minimizing MAE. Inner folds and
meta folds partition speakers by keyed id hashes, so results do not
depend on manifest ordering or on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import multiprocessing
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .fileio import format_float
from .functionals import FeatureMatrix, N_FUNCTIONALS
from .learners import config_fingerprint
from .phones import PhoneInventory
from .rng import fold_assignments
from .stacking import (
    DEFAULT_META_FOLDS,
    MODEL_CLASSES,
    _fit_base,
    _resolve_config,
    build_oof_matrix,
    fit_stacked,
    predict_stacked,
)

REPORT_FORMAT = "phonage-eval-report"
REPORT_VERSION = 1

DEFAULT_INNER_FOLDS = 5

# Meta-estimator tuning grids. "full" spans the documented search space;
# "small" is the economical default sized for desk-scale corpora.
FULL_GRIDS = {
    "svr": [
        {"C": c, "epsilon": e, "gamma_scale": g}
        for c in (0.1, 1.0, 10.0, 100.0)
        for e in (0.1, 0.5, 1.0)
        for g in (1.0, 0.1, 10.0)
    ],
    "adaboost": [
        {
            "n_rounds": r,
            "base": "forest",
            "base_params": {"n_trees": 3, "max_depth": d, "min_leaf": 2},
        }
        for r in (25, 50)
        for d in (2, 3, 5)
    ],
}
SMALL_GRIDS = {
    "svr": [
        {"C": 1.0, "epsilon": 0.5},
        {"C": 10.0, "epsilon": 0.5},
        {"C": 1.0, "epsilon": 0.1},
        {"C": 10.0, "epsilon": 0.1},
    ],
    "adaboost": [
        {
            "n_rounds": 10,
            "base": "forest",
            "base_params": {"n_trees": 3, "max_depth": 3, "min_leaf": 2},
        }
    ],
}


# --- metrics ----------------------------------------------------------------


def mae(y, yhat) -> float:
    y = np.asarray(y, float)
    yhat = np.asarray(yhat, float)
    if y.shape != yhat.shape or y.size == 0:
        raise DataError("mae needs equal-length non-empty vectors")
    return float(np.abs(y - yhat).mean())


def r2(y, yhat) -> float:
    y = np.asarray(y, float)
    yhat = np.asarray(yhat, float)
    if y.shape != yhat.shape or y.size < 2:
        raise DataError("r2 needs equal-length vectors with n >= 2")
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0
    return 1.0 - ss_res / ss_tot


def pearson(y, yhat) -> float:
    y = np.asarray(y, float)
    yhat = np.asarray(yhat, float)
    if y.shape != yhat.shape or y.size < 2:
        raise DataError("pearson needs equal-length vectors with n >= 2")
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    sy = math.sqrt(float((dy * dy).mean()))
    sp = math.sqrt(float((dp * dp).mean()))
    if sy == 0.0 or sp == 0.0:
        return 0.0  # zero-variance convention
    return float((dy * dp).mean() / (sy * sp))


def age_bucket(age: float, age_unit: str) -> int:
    if age_unit == "grade":
        return int(round(age))
    return int(math.floor(age))


def per_age_mae(scatter, age_unit: str) -> dict:
    """Bucketed MAE: integer grades, or floor-to-integer years."""
    if not scatter:
        raise DataError("per_age_mae needs a non-empty scatter")
    sums: dict = {}
    counts: dict = {}
    for true_age, pred in ((t, p) for t, p, *_ in scatter):
        b = age_bucket(true_age, age_unit)
        sums[b] = sums.get(b, 0.0) + abs(true_age - pred)
        counts[b] = counts.get(b, 0) + 1
    return {b: sums[b] / counts[b] for b in sorted(sums)}


def per_age_counts(scatter, age_unit: str) -> dict:
    counts: dict = {}
    for true_age, _pred, *_ in scatter:
        b = age_bucket(true_age, age_unit)
        counts[b] = counts.get(b, 0) + 1
    return counts


# --- LOSO harness -----------------------------------------------------------


@dataclass
class EvalReport:
    model_class: str
    mae: float
    r2: float
    pearson: float
    per_age: dict  # bucket -> mae
    per_age_n: dict  # bucket -> count
    scatter: list  # (true_age, predicted_age, speaker_id), sorted by speaker
    config: dict
    fingerprint: str
    seed: int
    age_unit: str
    n_speakers: int
    wall_clock_seconds: float
    convergence_warnings: int = 0
    tuning_selections: dict = field(default_factory=dict)
    baseline_in_sample: dict | None = None


def subset_rows(features: FeatureMatrix, rows) -> FeatureMatrix:
    rows = np.asarray(rows, dtype=int)
    return FeatureMatrix(
        speaker_ids=tuple(features.speaker_ids[i] for i in rows),
        inventory=features.inventory,
        values=features.values[rows],
        present=features.present[rows],
        ages=features.ages[rows],
        age_unit=features.age_unit,
    )


def sort_rows_by_speaker(features: FeatureMatrix) -> FeatureMatrix:
    order = sorted(range(features.n_speakers), key=lambda i: features.speaker_ids[i])
    return subset_rows(features, order)


def resolve_grid(grid, model_class):
    if model_class == "baseline":
        return []
    if isinstance(grid, str):
        try:
            return [dict(g) for g in {"small": SMALL_GRIDS, "full": FULL_GRIDS}[grid][model_class]]
        except KeyError:
            raise ConfigError(f"unknown grid name {grid!r}") from None
    grid = [dict(g) for g in grid]
    if not grid:
        raise ConfigError("tuning grid is empty")
    return grid


def tune_meta(M, ages, speaker_ids, grid, inner_folds, seed, model_class) -> dict:
    """Pick the grid entry with the lowest pooled inner-CV MAE.

    Ties keep the earliest grid entry. The inner partition hashes
    speaker ids with the master seed, so it ignores row order.
    """
    if len(grid) == 1:
        return dict(grid[0])
    assign = fold_assignments(speaker_ids, inner_folds, seed, "tune")
    fold_idx = np.array([assign[s] for s in speaker_ids])
    best = None
    for gi, params in enumerate(grid):
        abs_err = 0.0
        n_val = 0
        for f in range(inner_folds):
            val = fold_idx == f
            if not val.any() or (~val).sum() < 2:
                continue
            st, model = _fit_base(
                model_class, M[~val], ages[~val], params, (seed, "tune", gi, f)
            )
            pred = model.predict(st.transform(M[val]))
            abs_err += float(np.abs(pred - ages[val]).sum())
            n_val += int(val.sum())
        if n_val == 0:
            raise DataError("inner tuning folds left no validation speakers")
        score = abs_err / n_val
        if best is None or score < best[0]:
            best = (score, gi)
    return dict(grid[best[1]])


def _evaluate_one(features, config, hold_index):
    """One LOSO fold: returns (speaker_id, true_age, prediction,
    chosen-params-json, convergence_warnings)."""
    sid = features.speaker_ids[hold_index]
    true_age = float(features.ages[hold_index])
    train_rows = [i for i in range(features.n_speakers) if i != hold_index]
    train = subset_rows(features, train_rows)
    if config["model_class"] == "baseline":
        return sid, true_age, float(train.ages.mean()), None, 0

    stack_cfg = _resolve_config(
        config["model_class"],
        config["base_params"],
        None,
        config["meta_folds"],
        config["seed"],
    )
    M = build_oof_matrix(train, stack_cfg)
    chosen = tune_meta(
        M,
        train.ages,
        train.speaker_ids,
        config["grid"],
        config["inner_folds"],
        config["seed"],
        config["model_class"],
    )
    model = fit_stacked(
        train,
        model_class=config["model_class"],
        seed=config["seed"],
        meta_folds=config["meta_folds"],
        base_params=config["base_params"],
        meta_params=chosen,
        oof_matrix=M,
    )
    pred = float(predict_stacked(model, subset_rows(features, [hold_index]))[0])
    return sid, true_age, pred, json.dumps(chosen, sort_keys=True), model.convergence_warnings()


_POOL_CTX: dict = {}


def _pool_init(features, config):
    _POOL_CTX["features"] = features
    _POOL_CTX["config"] = config


def _pool_run(hold_index):
    return _evaluate_one(_POOL_CTX["features"], _POOL_CTX["config"], hold_index)


def loso_evaluate(
    features: FeatureMatrix,
    *,
    model_class: str,
    seed: int = 0,
    grid="small",
    meta_folds: int = DEFAULT_META_FOLDS,
    inner_folds: int = DEFAULT_INNER_FOLDS,
    base_params: dict | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Leave-one-speaker-out evaluation of a model class.

    ``jobs`` parallelizes outer folds; the report is byte-identical for
    any worker count. Rows are canonicalized to speaker-id order first so
    the report is also independent of manifest ordering.
    """
    if model_class not in MODEL_CLASSES + ("baseline",):
        raise ConfigError(f"unknown model_class {model_class!r}")
    features = sort_rows_by_speaker(features)
    n = features.n_speakers
    if n < 3:
        raise DataError(f"LOSO needs at least 3 speakers, got {n}")
    grid_list = resolve_grid(grid, model_class)
    if model_class != "baseline" and n < inner_folds + 1:
        raise DataError(f"need at least inner_folds + 1 = {inner_folds + 1} speakers, got {n}")

    resolved_base = None
    if model_class != "baseline":
        resolved_base = _resolve_config(model_class, base_params, None, meta_folds, seed)[
            "base_params"
        ]
    config = {
        "model_class": model_class,
        "seed": int(seed),
        "meta_folds": int(meta_folds),
        "inner_folds": int(inner_folds),
        "grid": grid_list,
        "base_params": resolved_base,
    }

    started = time.perf_counter()
    indices = list(range(n))
    if jobs > 1:
        with multiprocessing.Pool(jobs, initializer=_pool_init, initargs=(features, config)) as pool:
            results = list(pool.imap_unordered(_pool_run, indices, chunksize=1))
    else:
        results = [_evaluate_one(features, config, i) for i in indices]
    results.sort(key=lambda r: r[0])

    scatter = [(true, pred, sid) for sid, true, pred, _, _ in results]
    y = np.array([t for t, _, _ in scatter])
    yhat = np.array([p for _, p, _ in scatter])
    selections: dict = {}
    warnings = 0
    for _, _, _, chosen, warn in results:
        warnings += warn
        if chosen is not None:
            selections[chosen] = selections.get(chosen, 0) + 1

    report = EvalReport(
        model_class=model_class,
        mae=mae(y, yhat),
        r2=r2(y, yhat),
        pearson=pearson(y, yhat),
        per_age=per_age_mae(scatter, features.age_unit),
        per_age_n=per_age_counts(scatter, features.age_unit),
        scatter=scatter,
        config=config,
        fingerprint=config_fingerprint(config),
        seed=int(seed),
        age_unit=features.age_unit,
        n_speakers=n,
        wall_clock_seconds=time.perf_counter() - started,
        convergence_warnings=warnings,
        tuning_selections=selections,
    )
    if model_class == "baseline":
        const = np.full(n, features.ages.mean())
        report.baseline_in_sample = {
            "mae": mae(y, const),
            "r2": r2(y, const),
            "pearson": pearson(y, const),
        }
    return report


# --- report serialization ---------------------------------------------------


def report_document(report: EvalReport) -> dict:
    """Report body as a JSON-ready dict.

    Wall-clock time is deliberately excluded so identical runs produce
    byte-identical report files; the CLI records timing separately.
    """
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "model_class": report.model_class,
        "n_speakers": report.n_speakers,
        "age_unit": report.age_unit,
        "metrics": {"mae": report.mae, "r2": report.r2, "pearson": report.pearson},
        "per_age_mae": {
            str(b): {"mae": report.per_age[b], "n": report.per_age_n[b]} for b in report.per_age
        },
        "config": report.config,
        "config_fingerprint": report.fingerprint,
        "seed": report.seed,
        "convergence_warnings": report.convergence_warnings,
        "tuning_selections": report.tuning_selections,
    }
    if report.baseline_in_sample is not None:
        doc["baseline_in_sample"] = report.baseline_in_sample
    return doc


def write_scatter_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true_age", "predicted_age", "speaker_id"])
        for true_age, pred, sid in report.scatter:
            writer.writerow([format_float(true_age), format_float(pred), sid])


def write_per_age_csv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age_bucket", "mae", "n_speakers"])
        for b in sorted(report.per_age):
            writer.writerow([b, format_float(report.per_age[b]), report.per_age_n[b]])
