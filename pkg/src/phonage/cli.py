"""Command-line front end.

Subcommands: ``synth``, ``extract``, ``evaluate``, ``train``,
``predict``. Options may come from a JSON ``--config`` file; explicit
flags win. Every command writes a ``run.json`` with the resolved
configuration, the seed, and input-file hashes: two runs with equal
``run.json`` produce byte-identical outputs (worker count never affects
results and is therefore not recorded).

Exit codes: 0 success; 2 usage or configuration error; 3 data or
contract error; 4 success with convergence warnings (outputs written).
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .errors import ConfigError, DataError, ParseError, PhonageError, UnsupportedModelError
from .fileio import format_float, sha256_file, write_stable_json

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    try:
        return fn()
    except (ConfigError, UnsupportedModelError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    except (ParseError, DataError) as exc:
        _fail(EXIT_DATA, str(exc))
    except PhonageError as exc:
        _fail(EXIT_DATA, str(exc))


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _pick(flag, config, key, default):
    if flag is not None:
        return flag
    return config.get(key, default)


def _write_run_json(out_dir: Path, command: str, config: dict, inputs) -> None:
    doc = {
        "command": command,
        "package_version": __version__,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }
    write_stable_json(doc, out_dir / "run.json")


def _collect_ctm_paths(ctm_args):
    paths = []
    for arg in ctm_args:
        p = Path(arg)
        if p.is_dir():
            found = sorted(p.rglob("*.ctm"))
            if not found:
                raise DataError(f"no .ctm files under {p}")
            paths.extend(found)
        elif p.exists():
            paths.append(p)
        else:
            raise DataError(f"CTM path not found: {p}")
    if not paths:
        raise ConfigError("no CTM inputs given")
    return paths


@click.group()
@click.version_option(version=__version__)
def main():
    """Estimate child speaker age from phone-duration statistics."""


# --- synth -------------------------------------------------------------------


@main.command("synth")
@click.option("--spec", "spec_name", default=None, help="Spec JSON path or 'default'.")
@click.option("--seed", type=int, default=None, help="Master seed (default 0).")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_synth(spec_name, seed, out_dir, config_path):
    """Generate a synthetic alignment corpus (CTM directory + manifest)."""

    def run():
        from . import synth

        cfg = _load_config_file(config_path)
        spec_name_r = _pick(spec_name, cfg, "spec", "default")
        seed_r = int(_pick(seed, cfg, "seed", 0))
        spec = synth.load_spec(spec_name_r)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        synth.generate_corpus(spec, seed_r, out)
        resolved = {"spec": str(spec_name_r), "seed": seed_r}
        inputs = [] if spec_name_r == "default" else [Path(spec_name_r)]
        _write_run_json(out, "synth", resolved, inputs)
        click.echo(f"wrote {spec.n_speakers} speakers under {out}")

    _guard(run)


# --- extract -----------------------------------------------------------------


@main.command("extract")
@click.option("--ctm", "ctm_args", multiple=True, type=click.Path(), help="CTM file or directory.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--with-stress/--no-stress", "with_stress", default=None)
@click.option("--min-speaker-fraction", type=float, default=None)
@click.option("--skip-bad-durations", is_flag=True, default=None)
@click.option("--class-table", "class_table_path", type=click.Path(), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Also write a flat CSV.")
@click.option(
    "--histogram",
    "histogram_keys",
    multiple=True,
    help="Also export per-age duration histograms for these category keys.",
)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_extract(
    ctm_args,
    manifest_path,
    with_stress,
    min_speaker_fraction,
    skip_bad_durations,
    class_table_path,
    out_path,
    csv_path,
    histogram_keys,
    config_path,
):
    """Parse alignments, accumulate durations, write per-speaker features."""

    def run():
        from .align import load_corpus
        from .evaluation import age_bucket
        from .functionals import accumulate, build_feature_matrix, write_features_csv, write_features_jsonl
        from .phones import build_inventory, load_class_table
        from .synth import histogram_rows, write_histogram_csv

        cfg = _load_config_file(config_path)
        ctm_r = list(ctm_args) or cfg.get("ctm", [])
        if isinstance(ctm_r, str):
            ctm_r = [ctm_r]
        manifest_r = _pick(manifest_path, cfg, "manifest", None)
        if not manifest_r:
            raise ConfigError("--manifest is required")
        with_stress_r = _pick(with_stress, cfg, "with_stress", True)
        fraction_r = float(_pick(min_speaker_fraction, cfg, "min_speaker_fraction", 0.0))
        skip_r = bool(_pick(skip_bad_durations, cfg, "skip_bad_durations", False))
        table_path_r = _pick(class_table_path, cfg, "class_table", None)

        ctm_paths = _collect_ctm_paths(ctm_r)
        class_table = load_class_table(table_path_r) if table_path_r else None
        corpus = load_corpus(
            ctm_paths, manifest_r, skip_bad_durations=skip_r, class_table=class_table
        )
        inventory = build_inventory(corpus, with_stress_r, fraction_r)
        table = accumulate(corpus, inventory)
        features = build_feature_matrix(table, inventory, corpus.speakers)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_features_jsonl(features, out)
        if csv_path:
            write_features_csv(features, csv_path)

        for key in histogram_keys:
            bucketing = {
                s.speaker_id: age_bucket(s.age_value, s.age_unit) for s in corpus.speakers
            }
            rows = histogram_rows(table, bucketing, key)
            write_histogram_csv(rows, out.parent / f"histogram_{key}.csv")
            from .figures import save_histogram

            save_histogram(rows, out.parent / f"histogram_{key}.png", key)

        resolved = {
            "ctm": [str(p) for p in ctm_paths],
            "manifest": str(manifest_r),
            "with_stress": bool(with_stress_r),
            "min_speaker_fraction": fraction_r,
            "skip_bad_durations": skip_r,
            "class_table": str(table_path_r) if table_path_r else None,
            "histogram": list(histogram_keys),
        }
        inputs = list(ctm_paths) + [Path(manifest_r)]
        if table_path_r:
            inputs.append(Path(table_path_r))
        _write_run_json(out.parent, "extract", resolved, inputs)
        click.echo(
            f"wrote {features.n_speakers} speakers x {len(inventory)} categories to {out}"
        )

    _guard(run)


# --- evaluate ----------------------------------------------------------------


@main.command("evaluate")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option(
    "--model",
    "model_class",
    type=click.Choice(["baseline", "svr", "adaboost"]),
    default=None,
)
@click.option("--seed", type=int, default=None)
@click.option("--report", "report_dir", required=True, type=click.Path())
@click.option("--grid", type=click.Choice(["small", "full"]), default=None)
@click.option("--meta-folds", type=int, default=None)
@click.option("--inner-folds", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--importance", "with_importance", is_flag=True, default=None)
@click.option("--figures/--no-figures", "with_figures", default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_evaluate(
    features_path,
    model_class,
    seed,
    report_dir,
    grid,
    meta_folds,
    inner_folds,
    jobs,
    with_importance,
    with_figures,
    config_path,
):
    """Leave-one-speaker-out evaluation; writes report, CSVs, figures."""

    def run():
        from .evaluation import (
            DEFAULT_INNER_FOLDS,
            loso_evaluate,
            report_document,
            resolve_grid,
            tune_meta,
            write_per_age_csv,
            write_scatter_csv,
        )
        from .functionals import read_features_jsonl
        from .stacking import DEFAULT_META_FOLDS, _resolve_config, build_oof_matrix, fit_stacked

        cfg = _load_config_file(config_path)
        model_r = _pick(model_class, cfg, "model", None)
        if model_r is None:
            raise ConfigError("--model is required (baseline, svr, or adaboost)")
        seed_r = int(_pick(seed, cfg, "seed", 0))
        grid_r = _pick(grid, cfg, "grid", "small")
        meta_folds_r = int(_pick(meta_folds, cfg, "meta_folds", DEFAULT_META_FOLDS))
        inner_folds_r = int(_pick(inner_folds, cfg, "inner_folds", DEFAULT_INNER_FOLDS))
        jobs_r = int(_pick(jobs, cfg, "jobs", 1))
        importance_r = bool(_pick(with_importance, cfg, "importance", False))
        figures_r = bool(_pick(with_figures, cfg, "figures", True))
        if importance_r and model_r != "adaboost":
            raise ConfigError("--importance requires --model adaboost")

        features = read_features_jsonl(features_path)
        report = loso_evaluate(
            features,
            model_class=model_r,
            seed=seed_r,
            grid=grid_r,
            meta_folds=meta_folds_r,
            inner_folds=inner_folds_r,
            jobs=jobs_r,
        )

        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_stable_json(report_document(report), out / "report.json")
        write_scatter_csv(report, out / "scatter.csv")
        write_per_age_csv(report, out / "per_age_mae.csv")
        importances = None
        if importance_r:
            from .evaluation import sort_rows_by_speaker
            from .importance import meta_importance, write_importance_csv

            canon = sort_rows_by_speaker(features)
            stack_cfg = _resolve_config(model_r, None, None, meta_folds_r, seed_r)
            oof = build_oof_matrix(canon, stack_cfg)
            chosen = tune_meta(
                oof,
                canon.ages,
                canon.speaker_ids,
                resolve_grid(grid_r, model_r),
                inner_folds_r,
                seed_r,
                model_r,
            )
            full_model = fit_stacked(
                canon,
                model_class=model_r,
                seed=seed_r,
                meta_folds=meta_folds_r,
                meta_params=chosen,
                oof_matrix=oof,
            )
            importances = meta_importance(full_model)
            write_importance_csv(importances, out / "importance.csv")
        if figures_r:
            from .figures import save_importance, save_per_age, save_scatter

            save_scatter(report.scatter, out / "scatter.png", report.age_unit)
            save_per_age(report.per_age, report.per_age_n, out / "per_age_mae.png", report.age_unit)
            if importances is not None:
                save_importance(importances, out / "importance.png")
        write_stable_json(
            {"wall_clock_seconds": report.wall_clock_seconds}, out / "timing.json"
        )

        resolved = {
            "features": str(features_path),
            "model": model_r,
            "seed": seed_r,
            "grid": grid_r,
            "meta_folds": meta_folds_r,
            "inner_folds": inner_folds_r,
            "importance": importance_r,
            "figures": figures_r,
        }
        _write_run_json(out, "evaluate", resolved, [Path(features_path)])
        click.echo(
            f"{model_r}: mae={report.mae:.4f} r2={report.r2:.4f} pearson={report.pearson:.4f}"
        )
        if report.convergence_warnings:
            click.echo(
                f"warning: {report.convergence_warnings} model fits did not converge", err=True
            )
            sys.exit(EXIT_CONVERGENCE)

    _guard(run)


# --- train / predict ---------------------------------------------------------


@main.command("train")
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--model", "model_class", type=click.Choice(["svr", "adaboost"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--meta-folds", type=int, default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_train(features_path, model_class, seed, meta_folds, out_path, config_path):
    """Fit a stacked model on all speakers and serialize it."""

    def run():
        from .functionals import read_features_jsonl
        from .stacking import DEFAULT_META_FOLDS, fit_stacked, save_stacked

        cfg = _load_config_file(config_path)
        model_r = _pick(model_class, cfg, "model", None)
        if model_r is None:
            raise ConfigError("--model is required (svr or adaboost)")
        seed_r = int(_pick(seed, cfg, "seed", 0))
        meta_folds_r = int(_pick(meta_folds, cfg, "meta_folds", DEFAULT_META_FOLDS))
        base_params = cfg.get("base_params")
        meta_params = cfg.get("meta_params")

        features = read_features_jsonl(features_path)
        model = fit_stacked(
            features,
            model_class=model_r,
            seed=seed_r,
            meta_folds=meta_folds_r,
            base_params=base_params,
            meta_params=meta_params,
        )
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_stacked(model, out)
        resolved = {
            "features": str(features_path),
            "model": model_r,
            "seed": seed_r,
            "meta_folds": meta_folds_r,
            "base_params": model.config["base_params"],
            "meta_params": model.config["meta_params"],
        }
        _write_run_json(out.parent, "train", resolved, [Path(features_path)])
        click.echo(f"trained {model_r} stacked model over {len(model.categories)} categories")
        if model.convergence_warnings():
            click.echo(
                f"warning: {model.convergence_warnings()} base fits did not converge", err=True
            )
            sys.exit(EXIT_CONVERGENCE)

    _guard(run)


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--features", "features_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_predict(model_path, features_path, out_path):
    """Predict ages for a feature file with a trained stacked model."""

    def run():
        import csv

        from .functionals import read_features_jsonl
        from .stacking import load_stacked, predict_stacked

        model = load_stacked(model_path)
        features = read_features_jsonl(features_path)
        predictions = predict_stacked(model, features)
        out = Path(out_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["speaker_id", "predicted_age"])
            for sid, pred in zip(features.speaker_ids, predictions):
                writer.writerow([sid, format_float(pred)])
        _write_run_json(
            out.parent,
            "predict",
            {"model": str(model_path), "features": str(features_path)},
            [Path(model_path), Path(features_path)],
        )
        click.echo(f"wrote {len(predictions)} predictions to {out}")

    _guard(run)


if __name__ == "__main__":
    main()
