"""Per-speaker duration accumulation and distribution descriptors.

Each duration multiset is summarized by eight functionals, in this fixed
column order: mean, variance, min, max, skewness, kurtosis, entropy,
mean absolute deviation. Moments are population moments (so they are
defined for any n >= 1); kurtosis is excess kurtosis; entropy is Shannon
entropy in nats over fixed 10 ms bins anchored at zero, the native frame
resolution of the alignments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .phones import PhoneInventory, expand_categories

FUNCTIONAL_NAMES = (
    "mean",
    "variance",
    "min",
    "max",
    "skewness",
    "kurtosis",
    "entropy",
    "mad",
)
N_FUNCTIONALS = len(FUNCTIONAL_NAMES)

ENTROPY_BIN_WIDTH = 0.01
# Shape statistics are zeroed below this variance instead of dividing by ~0.
_VARIANCE_FLOOR = 1e-12
# Nudge against FP droop so frame-quantized values land in their own bin.
_BIN_EPS = 1e-9


def accumulate(corpus, inventory: PhoneInventory) -> dict:
    """Build the per-speaker duration table.

    Returns ``{speaker_id: {category_key: sorted ndarray of seconds}}``;
    every segment contributes its duration to each inventory category in
    its expansion.
    """
    keyset = set(inventory.keys)
    table: dict = {}
    cache: dict = {}
    for speaker in corpus.speakers:
        per_key: dict = {}
        for seg in corpus.segments.get(speaker.speaker_id, ()):
            keys = cache.get(seg.label)
            if keys is None:
                keys = expand_categories(seg.label, inventory.with_stress) & keyset
                cache[seg.label] = keys
            for key in keys:
                per_key.setdefault(key, []).append(seg.duration)
        if per_key:
            table[speaker.speaker_id] = {
                key: np.sort(np.asarray(vals, dtype=float)) for key, vals in per_key.items()
            }
    return table


def compute_functionals(durations) -> np.ndarray:
    """Eight descriptors of one duration multiset (n >= 1)."""
    x = np.asarray(durations, dtype=float)
    if x.size == 0:
        raise DataError("cannot compute functionals of an empty duration set")
    n = x.size
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev**2)
    if m2 < _VARIANCE_FLOOR:
        skew = 0.0
        kurt = 0.0
    else:
        skew = np.mean(dev**3) / m2**1.5
        kurt = np.mean(dev**4) / m2**2 - 3.0
    bins = np.floor(x / ENTROPY_BIN_WIDTH + _BIN_EPS).astype(np.int64)
    counts = np.unique(bins, return_counts=True)[1]
    p = counts / n
    entropy = float(-(p * np.log(p)).sum()) if counts.size > 1 else 0.0
    mad = np.abs(dev).mean()
    return np.array([mean, m2, x.min(), x.max(), skew, kurt, entropy, mad], dtype=float)


@dataclass(frozen=True)
class FeatureMatrix:
    """Speakers x (categories x 8 functionals), with a presence mask.

    Cells for absent categories hold 0.0 and are masked out; learners
    never read them directly (the stacking layer imputes instead).
    """

    speaker_ids: tuple
    inventory: PhoneInventory
    values: np.ndarray  # (n_speakers, n_keys * 8)
    present: np.ndarray  # (n_speakers, n_keys) bool
    ages: np.ndarray  # (n_speakers,)
    age_unit: str

    @property
    def n_speakers(self) -> int:
        return len(self.speaker_ids)

    def block(self, key_index: int) -> np.ndarray:
        """The 8-column functional block of one category."""
        lo = key_index * N_FUNCTIONALS
        return self.values[:, lo : lo + N_FUNCTIONALS]


def build_feature_matrix(table, inventory: PhoneInventory, speakers) -> FeatureMatrix:
    """Assemble the feature matrix in manifest speaker order."""
    units = {s.age_unit for s in speakers}
    if len(units) > 1:
        raise DataError(f"mixed age units in corpus: {sorted(units)}")
    missing_ages = [sid for sid in table if sid not in {s.speaker_id for s in speakers}]
    if missing_ages:
        raise DataError(f"speakers without age records: {sorted(missing_ages)}")

    kept = [s for s in speakers if s.speaker_id in table]
    if not kept:
        raise DataError("no speaker has any accumulated durations")
    n = len(kept)
    k = len(inventory)
    values = np.zeros((n, k * N_FUNCTIONALS), dtype=float)
    present = np.zeros((n, k), dtype=bool)
    ages = np.empty(n, dtype=float)
    for i, rec in enumerate(kept):
        ages[i] = rec.age_value
        per_key = table[rec.speaker_id]
        for j, key in enumerate(inventory.keys):
            durations = per_key.get(key)
            if durations is None or len(durations) == 0:
                continue
            present[i, j] = True
            values[i, j * N_FUNCTIONALS : (j + 1) * N_FUNCTIONALS] = compute_functionals(durations)
    return FeatureMatrix(
        speaker_ids=tuple(r.speaker_id for r in kept),
        inventory=inventory,
        values=values,
        present=present,
        ages=ages,
        age_unit=next(iter(units)),
    )


def write_features_jsonl(features: FeatureMatrix, path) -> None:
    """One JSON record per speaker: features per category plus missing list."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in iter_feature_records(features):
            fh.write(line + "\n")


def iter_feature_records(features: FeatureMatrix):
    for i, sid in enumerate(features.speaker_ids):
        feats = {}
        missing = []
        for j, key in enumerate(features.inventory.keys):
            if features.present[i, j]:
                feats[key] = [float(v) for v in features.block(j)[i]]
            else:
                missing.append(key)
        record = {
            "speaker_id": sid,
            "age": float(features.ages[i]),
            "age_unit": features.age_unit,
            "features": feats,
            "missing": missing,
        }
        yield json.dumps(record, sort_keys=True)


def read_features_jsonl(path) -> FeatureMatrix:
    """Inverse of :func:`write_features_jsonl`.

    The inventory is reconstructed from the per-record key sets; its
    construction flags (stress handling, presence threshold) are not
    stored in the feature file.
    """
    speaker_ids = []
    ages = []
    units = set()
    rows = []
    keyset = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            keys = set(rec["features"]) | set(rec["missing"])
            if keyset is None:
                keyset = keys
            elif keys != keyset:
                raise DataError(f"{path}:{lineno}: inconsistent category keys across records")
            speaker_ids.append(rec["speaker_id"])
            ages.append(float(rec["age"]))
            units.add(rec.get("age_unit", "grade"))
            rows.append(rec["features"])
    if not rows:
        raise DataError(f"{path}: no feature records")
    if len(units) > 1:
        raise DataError(f"{path}: mixed age units {sorted(units)}")
    if len(set(speaker_ids)) != len(speaker_ids):
        raise DataError(f"{path}: duplicate speaker records")
    inventory = PhoneInventory(keys=tuple(sorted(keyset)))
    n, k = len(rows), len(inventory)
    values = np.zeros((n, k * N_FUNCTIONALS), dtype=float)
    present = np.zeros((n, k), dtype=bool)
    for i, feats in enumerate(rows):
        for j, key in enumerate(inventory.keys):
            vec = feats.get(key)
            if vec is None:
                continue
            if len(vec) != N_FUNCTIONALS:
                raise DataError(f"{path}: speaker {speaker_ids[i]} key {key}: expected 8 values")
            present[i, j] = True
            values[i, j * N_FUNCTIONALS : (j + 1) * N_FUNCTIONALS] = vec
    return FeatureMatrix(
        speaker_ids=tuple(speaker_ids),
        inventory=inventory,
        values=values,
        present=present,
        ages=np.asarray(ages),
        age_unit=next(iter(units)),
    )


def write_features_csv(features: FeatureMatrix, path) -> None:
    """Flat CSV export for external tools; masked cells are left empty."""
    header = ["speaker_id", "age"]
    for key in features.inventory.keys:
        header.extend(f"{key}.{name}" for name in FUNCTIONAL_NAMES)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, sid in enumerate(features.speaker_ids):
            row = [sid, format(features.ages[i], ".17g")]
            for j in range(len(features.inventory)):
                if features.present[i, j]:
                    row.extend(format(v, ".17g") for v in features.block(j)[i])
                else:
                    row.extend([""] * N_FUNCTIONALS)
            writer.writerow(row)
