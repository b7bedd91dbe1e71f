"""Matplotlib renderings of the delimited outputs.

Each report CSV has a figure twin written next to it: the true-vs-
predicted scatter, the per-age-bucket MAE bars, the top-k importance
bars, and per-age duration histograms. Rendering is headless (Agg) and
styling is kept plain so the figures read like the data files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def save_scatter(scatter, path, age_unit: str) -> None:
    true_ages = [t for t, _, _ in scatter]
    preds = [p for _, p, _ in scatter]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(true_ages, preds, s=18, alpha=0.6, edgecolors="none")
    lo = min(min(true_ages), min(preds))
    hi = max(max(true_ages), max(preds))
    pad = 0.05 * (hi - lo + 1e-9)
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], "k--", linewidth=1)
    ax.set_xlabel(f"true age ({age_unit})")
    ax.set_ylabel(f"predicted age ({age_unit})")
    ax.set_title("Age regression scatter")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_per_age(per_age: dict, per_age_n: dict, path, age_unit: str) -> None:
    buckets = sorted(per_age)
    values = [per_age[b] for b in buckets]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar([str(b) for b in buckets], values, color="tab:blue")
    for i, b in enumerate(buckets):
        ax.annotate(
            f"n={per_age_n.get(b, 0)}",
            (i, values[i]),
            ha="center",
            va="bottom",
            fontsize=7,
        )
    ax.set_xlabel(f"age bucket ({age_unit})")
    ax.set_ylabel("MAE")
    ax.set_title("MAE by age bucket")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_importance(importances: dict, path, k: int = 20) -> None:
    from .importance import top_k

    ranked = top_k(importances, k)
    keys = [key for key, _ in ranked][::-1]
    values = [val for _, val in ranked][::-1]
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(keys) + 1.2))
    ax.barh(keys, values, color="tab:green")
    ax.set_xlabel("importance")
    ax.set_title(f"Top-{len(keys)} category importance")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_histogram(rows, path, category: str) -> None:
    """Small-multiple duration histograms per age bucket from
    ``synth.histogram_rows`` output."""
    buckets = sorted({r[0] for r in rows})
    n = len(buckets)
    cols = min(4, n)
    rows_n = (n + cols - 1) // cols
    fig, axes = plt.subplots(
        rows_n, cols, figsize=(3 * cols, 2.2 * rows_n), sharex=True, sharey=True, squeeze=False
    )
    for i, bucket in enumerate(buckets):
        ax = axes[i // cols][i % cols]
        sub = [(lo, c) for b, lo, _hi, c in rows if b == bucket]
        ax.bar(
            [lo for lo, _ in sub],
            [c for _, c in sub],
            width=0.009,
            align="edge",
            color="tab:purple",
        )
        ax.set_title(f"bucket {bucket}", fontsize=8)
    for j in range(n, rows_n * cols):
        axes[j // cols][j % cols].axis("off")
    fig.suptitle(f"Duration distribution: {category}")
    fig.supxlabel("duration (s)")
    fig.supylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
