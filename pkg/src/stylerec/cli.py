"""Command-line entry points: label-styles, build-events, build-memory,
recommend, evaluate, serve."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .lexicon import load_lexicon


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Style- and event-conditioned outfit recommendation."""


@main.command("label-styles")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--theta", required=True, type=float)
@click.option("--exclude-pattern", "exclude_patterns", multiple=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="machine-readable stats")
def label_styles(lexicon_path, manifest_path, theta, exclude_patterns, out_path, as_json):
    """Label outfits with style patterns, rejecting unclear matches."""
    from .preprocess import read_manifest, write_manifest
    from .style import StyleClassifierConfig, build_label_dataset

    try:
        lexicon = load_lexicon(lexicon_path)
        cfg = StyleClassifierConfig(theta=theta)
        labeled, stats = build_label_dataset(
            read_manifest(manifest_path), lexicon, cfg,
            exclude_patterns=tuple(exclude_patterns))
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    write_manifest(labeled, out_path)
    summary = {
        "labeled": stats.labeled, "rejected": stats.rejected,
        "excluded": stats.excluded, "errors": len(stats.errors),
        "pattern_counts": {str(k): v for k, v in sorted(stats.pattern_counts.items())},
    }
    if as_json:
        click.echo(json.dumps(summary))
    else:
        click.echo(f"labeled {stats.labeled}, rejected {stats.rejected}, "
                   f"excluded {stats.excluded}, errors {len(stats.errors)}")


@main.command("build-events")
@click.option("--detections", "detections_path", required=True, type=click.Path(exists=True))
@click.option("--images", "images_dir", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.8, type=float, show_default=True)
@click.option("--split", "split_ratio", default=0.77, type=float, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def build_events(detections_path, images_dir, threshold, split_ratio, out_dir, as_json):
    """Build a garment/event dataset from detector output."""
    from .events import build_event_dataset, detection_from_record
    from .preprocess import read_manifest

    try:
        dets = [detection_from_record(r) for r in read_manifest(detections_path)]
        records, stats = build_event_dataset(dets, images_dir, threshold,
                                             split_ratio, out_dir)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    summary = {
        "total": stats.total, "skipped": stats.skipped,
        "train": stats.train, "test": stats.test,
        "per_category": {str(k): v for k, v in sorted(stats.per_category.items())},
    }
    if as_json:
        click.echo(json.dumps(summary))
    else:
        click.echo(f"wrote {stats.total} garments "
                   f"({stats.train} train / {stats.test} test), "
                   f"skipped {stats.skipped}")


@main.command("build-memory")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--tau", required=True, type=float)
@click.option("--capacity", default=None, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def build_memory_cmd(lexicon_path, manifest_path, tau, capacity, out_path, as_json):
    """Populate the recommendation memory from an outfit manifest."""
    from .memory import build_memory, save_store
    from .preprocess import read_manifest

    try:
        lexicon = load_lexicon(lexicon_path)
        store, stats = build_memory(list(read_manifest(manifest_path)), tau=tau,
                                    capacity=capacity, lexicon=lexicon)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    save_store(store, out_path)
    summary = {"stored": stats.stored, "rejected": stats.rejected,
               "evicted": stats.evicted, "errors": len(stats.errors)}
    if as_json:
        click.echo(json.dumps(summary))
    else:
        click.echo(f"stored {stats.stored}, rejected {stats.rejected}, "
                   f"evicted {stats.evicted}, errors {len(stats.errors)}")


@main.command("recommend")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--top", "top_path", required=True, type=click.Path(exists=True))
@click.option("--top-mask", "top_mask", default=None, type=click.Path(exists=True))
@click.option("--k", default=5, type=int, show_default=True)
@click.option("--style", "style_target", default=None,
              help="target style pattern name or id")
@click.option("--event", "event_target", default=None,
              help="target event category id")
@click.option("--mode", type=click.Choice(["filter", "rerank"]), default="filter",
              show_default=True)
@click.option("--min-posterior", default=0.0, type=float, show_default=True)
@click.option("--theta", default=None, type=float,
              help="style acceptance threshold (required with --style)")
@click.option("--train-manifest", default=None, type=click.Path(exists=True),
              help="outfit manifest with event labels (required with --event)")
@click.option("--json", "as_json", is_flag=True)
def recommend_cmd(lexicon_path, store_path, top_path, top_mask, k, style_target,
                  event_target, mode, min_posterior, theta, train_manifest, as_json):
    """Recommend bottoms for a query top, optionally conditioned."""
    import numpy as np

    from .memory import (Condition, ConditioningClassifiers, load_store,
                         recommend, recommend_conditioned)
    from .preprocess import load_garment_image
    from .service import _build_event_model
    from .style import StyleClassifierConfig

    if style_target and event_target:
        _fail("use at most one of --style / --event", 2)
    try:
        lexicon = load_lexicon(lexicon_path)
        store = load_store(store_path)
        query = load_garment_image(top_path, top_mask)
        if style_target is not None:
            if theta is None:
                _fail("--style requires --theta", 2)
            target = None
            for p in lexicon.patterns:
                if style_target in (str(p.id), p.name):
                    target = p.id
            if target is None:
                _fail(f"unknown style pattern {style_target!r}")
            cond = Condition(kind="style", target=target, mode=mode,
                             min_posterior=min_posterior)
            classifiers = ConditioningClassifiers(
                style_cfg=StyleClassifierConfig(theta=theta))
            result = recommend_conditioned(store, query, k, cond, classifiers, lexicon)
        elif event_target is not None:
            if train_manifest is None:
                _fail("--event requires --train-manifest", 2)
            model = _build_event_model(train_manifest, lexicon, k=1)
            if model is None:
                _fail("training manifest yielded no event model")
            cond = Condition(kind="event", target=int(event_target), mode=mode,
                             min_posterior=min_posterior)
            classifiers = ConditioningClassifiers(
                event_model=model, event_categories=np.unique(model.labels))
            result = recommend_conditioned(store, query, k, cond, classifiers, lexicon)
        else:
            result = recommend(store, query, k, lexicon)
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps({
            "query_id": result.query_id,
            "shortfall": result.shortfall,
            "proposals": [{"bottom_id": p.bottom_id, "score": p.score}
                          for p in result.proposals],
        }))
    else:
        for rank, p in enumerate(result.proposals, 1):
            click.echo(f"{rank}\t{p.bottom_id}\t{p.score:.6f}")
        if result.shortfall:
            click.echo(f"# shortfall: {result.shortfall} fewer than requested",
                       err=True)


@main.command("evaluate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default="eval_out", type=click.Path(),
              show_default=True)
@click.option("--json", "as_json", is_flag=True)
def evaluate_cmd(config_path, out_dir, as_json):
    """Run the full evaluation protocol grid from a config file."""
    from .experiment import ConfigError, load_experiment_config, run_experiment

    try:
        config = load_experiment_config(config_path)
        report = run_experiment(config, out_dir)
    except (ConfigError, ValueError, OSError) as exc:
        _fail(str(exc))
    if as_json:
        click.echo(json.dumps(report.to_json()))
    else:
        click.echo(f"report written to {Path(out_dir) / 'report.csv'}")


@main.command("serve")
@click.option("--lexicon", "lexicon_path", required=True, type=click.Path(exists=True))
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--theta", required=True, type=float)
@click.option("--train-manifest", default=None, type=click.Path(exists=True))
@click.option("--assets", "asset_dir", default=None, type=click.Path())
@click.option("--host", default="127.0.0.1", envvar="STYLEREC_HOST", show_default=True)
@click.option("--port", default=8000, type=int, envvar="STYLEREC_PORT", show_default=True)
def serve_cmd(lexicon_path, store_path, theta, train_manifest, asset_dir, host, port):
    """Start the HTTP service."""
    from .service import ServiceConfig, serve

    config = ServiceConfig(lexicon_path=lexicon_path, store_path=store_path,
                           theta=theta, event_train_manifest=train_manifest,
                           asset_dir=asset_dir)
    try:
        serve(config, host=host, port=port)
    except FileNotFoundError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
