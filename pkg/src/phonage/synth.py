"""Deterministic synthetic-corpus generator.

Encodes the developmental duration phenomena the estimator targets:
per-phone durations are unimodal and roughly Gaussian, younger speakers
have longer and more variable durations, and both within- and
between-speaker spread shrink with age. Signal categories get a negative
age slope on the mean; noise categories are age-independent. All draws
come from streams keyed by (seed, speaker, category), so generation is
reproducible and parallelizable, and the per-speaker ground truth can be
recomputed without the files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .fileio import format_float
from .rng import child_rng

FRAME_SECONDS = 0.01  # alignment frame shift; durations are quantized to it


@dataclass(frozen=True)
class CategorySpec:
    label: str
    base_mean: float  # seconds at age zero
    age_slope: float  # seconds per age unit (negative or zero)
    within_std: float  # per-occurrence std at the youngest age
    std_decay: float  # fractional per-age-unit shrink of both stds
    speaker_std: float  # per-speaker offset std at the youngest age

    def mean_at(self, age: float) -> float:
        return self.base_mean + self.age_slope * age

    def within_std_at(self, age: float, age_low: float) -> float:
        return self.within_std * (1.0 - self.std_decay) ** (age - age_low)

    def speaker_std_at(self, age: float, age_low: float) -> float:
        return self.speaker_std * (1.0 - self.std_decay) ** (age - age_low)


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int
    age_low: int
    age_high: int
    occurrences: tuple  # inclusive (lo, hi) per speaker per category
    signal: tuple  # CategorySpec with negative slopes
    noise: tuple  # CategorySpec with zero slopes
    age_unit: str = "grade"

    @property
    def categories(self) -> tuple:
        return tuple(self.signal) + tuple(self.noise)

    def validate(self) -> None:
        if self.n_speakers < 2:
            raise ConfigError("n_speakers must be >= 2")
        if self.age_high < self.age_low:
            raise ConfigError("age_high must be >= age_low")
        lo, hi = self.occurrences
        if lo < 1 or hi < lo:
            raise ConfigError("occurrence range must satisfy 1 <= lo <= hi")
        if not self.categories:
            raise ConfigError("spec needs at least one category")
        labels = [c.label for c in self.categories]
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate category labels in spec")
        for cat in self.categories:
            if cat.mean_at(self.age_high) <= 0:
                raise ConfigError(
                    f"category {cat.label!r}: mean duration is not positive at age "
                    f"{self.age_high} (base {cat.base_mean}, slope {cat.age_slope})"
                )
            if not 0.0 <= cat.std_decay < 1.0:
                raise ConfigError(f"category {cat.label!r}: std_decay must be in [0, 1)")


def spec_from_dict(doc: dict) -> SynthSpec:
    def cat(entry):
        return CategorySpec(
            label=entry["label"],
            base_mean=float(entry["base_mean"]),
            age_slope=float(entry.get("age_slope", 0.0)),
            within_std=float(entry["within_std"]),
            std_decay=float(entry.get("std_decay", 0.0)),
            speaker_std=float(entry.get("speaker_std", 0.0)),
        )

    try:
        spec = SynthSpec(
            n_speakers=int(doc["n_speakers"]),
            age_low=int(doc["age_low"]),
            age_high=int(doc["age_high"]),
            occurrences=(int(doc["occurrences"][0]), int(doc["occurrences"][1])),
            signal=tuple(cat(e) for e in doc.get("signal", [])),
            noise=tuple(cat(e) for e in doc.get("noise", [])),
            age_unit=doc.get("age_unit", "grade"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid synth spec: {exc}") from None
    spec.validate()
    return spec


def load_spec(name_or_path) -> SynthSpec:
    """Load a spec from a JSON file, or the built-in ``default``."""
    if name_or_path == "default":
        text = resources.files("phonage.data").joinpath("default_spec.json").read_text("utf-8")
        return spec_from_dict(json.loads(text))
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    return spec_from_dict(json.loads(path.read_text("utf-8")))


def default_spec() -> SynthSpec:
    return load_spec("default")


def speaker_ids(spec: SynthSpec):
    return [f"spk{i:04d}" for i in range(spec.n_speakers)]


def speaker_age(spec: SynthSpec, index: int) -> int:
    buckets = spec.age_high - spec.age_low + 1
    return spec.age_low + (index % buckets)


def true_speaker_mean(spec: SynthSpec, seed: int, sid: str, age: float, cat: CategorySpec) -> float:
    """Category mean for one speaker: cohort mean plus that speaker's
    persistent offset."""
    offset = float(child_rng(seed, "offset", sid, cat.label).normal()) * cat.speaker_std_at(
        age, spec.age_low
    )
    return cat.mean_at(age) + offset


def speaker_truth(spec: SynthSpec, seed: int) -> dict:
    """Ground truth per speaker: age and true per-category means."""
    truth = {}
    for i, sid in enumerate(speaker_ids(spec)):
        age = speaker_age(spec, i)
        truth[sid] = {
            "age": age,
            "means": {
                cat.label: true_speaker_mean(spec, seed, sid, age, cat)
                for cat in spec.categories
            },
        }
    return truth


def _draw_durations(spec, seed, sid, age, cat, count) -> np.ndarray:
    """Truncated Gaussian draws, quantized to the frame grid."""
    mean = true_speaker_mean(spec, seed, sid, age, cat)
    std = cat.within_std_at(age, spec.age_low)
    rng = child_rng(seed, "dur", sid, cat.label)
    values = rng.normal(mean, std, size=count)
    for _ in range(1000):
        bad = values < FRAME_SECONDS
        if not bad.any():
            break
        values[bad] = rng.normal(mean, std, size=int(bad.sum()))
    else:
        raise DataError(f"category {cat.label!r}: cannot draw positive durations")
    return np.round(values, 2)


def generate_speaker_segments(spec: SynthSpec, seed: int, index: int):
    """CTM lines for one speaker's single utterance."""
    sid = speaker_ids(spec)[index]
    age = speaker_age(spec, index)
    lo, hi = spec.occurrences
    lines = []
    start_cs = 0  # integer centiseconds; exact sequential timing
    for cat in spec.categories:
        count = int(child_rng(seed, "occ", sid, cat.label).integers(lo, hi + 1))
        for dur in _draw_durations(spec, seed, sid, age, cat, count):
            dur_cs = int(round(dur * 100))
            lines.append(
                f"{sid}-u0 1 {start_cs / 100:.2f} {dur_cs / 100:.2f} {cat.label}"
            )
            start_cs += dur_cs
    return sid, age, lines


def generate_corpus(spec: SynthSpec, seed: int, out_dir) -> dict:
    """Write per-speaker CTM files and the manifest; returns the paths."""
    spec.validate()
    out = Path(out_dir)
    ctm_dir = out / "ctm"
    ctm_dir.mkdir(parents=True, exist_ok=True)
    manifest_rows = ["speaker_id,age_value,age_unit"]
    ctm_paths = []
    for i in range(spec.n_speakers):
        sid, age, lines = generate_speaker_segments(spec, seed, i)
        path = ctm_dir / f"{sid}.ctm"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        ctm_paths.append(path)
        manifest_rows.append(f"{sid},{age},{spec.age_unit}")
    manifest_path = out / "manifest.csv"
    manifest_path.write_text("\n".join(manifest_rows) + "\n", encoding="utf-8")
    return {"ctm_dir": ctm_dir, "ctm_paths": ctm_paths, "manifest": manifest_path}


# --- histogram export -------------------------------------------------------


def histogram_rows(table: dict, bucketing: dict, category: str):
    """Frame-width bin counts of one category, per age bucket.

    ``bucketing`` maps speaker_id to an integer age bucket. Bins cover
    the globally occupied range; buckets without observations keep their
    zero rows so downstream plots share a common axis.
    """
    per_bucket: dict = {int(b): [] for b in bucketing.values()}
    found = False
    for sid, cats in table.items():
        if sid not in bucketing:
            continue
        durations = cats.get(category)
        if durations is None or len(durations) == 0:
            continue
        found = True
        per_bucket[int(bucketing[sid])].extend(np.asarray(durations))
    if not found:
        raise DataError(f"category {category!r} absent from the duration table")

    def bin_of(x):
        return int(math.floor(x / FRAME_SECONDS + 1e-9))

    all_bins = [bin_of(x) for vals in per_bucket.values() for x in vals]
    lo, hi = min(all_bins), max(all_bins)
    rows = []
    for bucket in sorted(per_bucket):
        counts = {}
        for x in per_bucket[bucket]:
            b = bin_of(x)
            counts[b] = counts.get(b, 0) + 1
        for b in range(lo, hi + 1):
            rows.append((bucket, b * FRAME_SECONDS, (b + 1) * FRAME_SECONDS, counts.get(b, 0)))
    return rows


def write_histogram_csv(rows, path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age_bucket", "bin_start", "bin_end", "count"])
        for bucket, lo, hi, count in rows:
            writer.writerow([bucket, format_float(lo), format_float(hi), count])
