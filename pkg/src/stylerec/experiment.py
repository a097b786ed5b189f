"""Experiment runner: unconditioned, conditioned and diversity protocols.

Produces a per-metric grid over the configured cutoffs (one column per k)
as both CSV and JSON. All randomness flows from a single seed, so reruns
with the same config are identical.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .events import assign_split
from .knn import LabeledFeatureSet
from .lexicon import CisLexicon, load_lexicon
from .memory import (
    Condition,
    ConditioningClassifiers,
    MemoryStore,
    build_memory,
    classify_pair_event,
    classify_pair_style,
    query_features,
    recommend_conditioned,
    _rank_entries,
)
from .metrics import (
    accuracy_at_k,
    average_precision,
    mean_average_precision,
    random_baseline,
    recommendation_entropy,
)
from .preprocess import load_garment_image, outfit_concat_features, read_manifest
from .style import StyleClassifierConfig

DEFAULT_K_VALUES = (5, 10, 20, 30, 40, 50, 60)


@dataclass
class EvalReport:
    k_values: list[int]
    seed: int
    protocols: dict[str, dict[str, dict[int, float]]] = field(default_factory=dict)

    def set(self, protocol: str, metric: str, k: int, value: float):
        self.protocols.setdefault(protocol, {}).setdefault(metric, {})[k] = value

    def validate(self):
        for proto, metrics in self.protocols.items():
            for metric, cells in metrics.items():
                missing = [k for k in self.k_values if k not in cells]
                if missing:
                    raise ValueError(f"{proto}/{metric} missing k={missing}")

    def to_json(self) -> dict:
        return {
            "k_values": self.k_values,
            "seed": self.seed,
            "protocols": {
                proto: {m: {str(k): v for k, v in cells.items()}
                        for m, cells in metrics.items()}
                for proto, metrics in self.protocols.items()
            },
        }

    def write(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(self.to_json(), indent=2), encoding="utf-8")
        with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["protocol", "metric"] + [str(k) for k in self.k_values])
            for proto in sorted(self.protocols):
                for metric in sorted(self.protocols[proto]):
                    cells = self.protocols[proto][metric]
                    writer.writerow([proto, metric]
                                    + [f"{cells[k]:.6f}" for k in self.k_values])
        return out_dir / "report.json", out_dir / "report.csv"


class ConfigError(ValueError):
    """Experiment config references a resource that cannot be resolved."""


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"experiment config missing required key {key!r}")
    return config[key]


@dataclass
class _Query:
    source_id: str
    query_hist: object
    query_vec: np.ndarray
    pattern: int
    event: int
    bottom_id: str
    bottom_category: str
    bottom_color: int


def _prepare(config: dict):
    lexicon_path = Path(_require(config, "lexicon"))
    if not lexicon_path.exists():
        raise ConfigError(f"lexicon file not found: {lexicon_path}")
    lexicon = load_lexicon(lexicon_path)
    manifest_path = Path(_require(config, "outfits"))
    if not manifest_path.exists():
        raise ConfigError(f"outfit manifest not found: {manifest_path}")
    records = list(read_manifest(manifest_path))
    theta = float(_require(config, "theta"))
    tau = float(config.get("tau", 0.05))
    split_ratio = float(config.get("split_ratio", 0.7))
    cfg = StyleClassifierConfig(theta=theta,
                                distance_variant=config.get("distance_variant", "l2"))

    train = [r for r in records if assign_split(r["source_id"], split_ratio) == "train"]
    test = [r for r in records if assign_split(r["source_id"], split_ratio) == "test"]
    if not train or not test:
        raise ConfigError("split produced an empty train or test set")

    store, _ = build_memory(train, tau=tau, capacity=config.get("capacity"),
                            lexicon=lexicon)
    if not store.entries:
        raise ConfigError("memory store is empty after construction")

    # event k-NN model over training outfit features
    feats, labels = [], []
    for rec in train:
        top = load_garment_image(rec["top_image"], rec.get("top_mask"),
                                 source_id=rec["source_id"])
        bottom = load_garment_image(rec["bottom_image"], rec.get("bottom_mask"),
                                    source_id=rec["source_id"])
        hist = outfit_concat_features(top, bottom, lexicon)
        feats.append(hist.to_vector(lexicon, normalize="l2"))
        labels.append(int(rec["labels"]["event"]))
    event_model = LabeledFeatureSet(features=np.stack(feats),
                                    labels=np.array(labels),
                                    k=int(config.get("event_k", 1)))
    event_categories = np.arange(int(config.get("n_events", 14)), dtype=np.int64)

    queries = []
    for rec in test:
        top = load_garment_image(rec["top_image"], rec.get("top_mask"),
                                 source_id=rec["source_id"])
        vec, hist = query_features(top, lexicon)
        queries.append(_Query(
            source_id=rec["source_id"],
            query_hist=hist,
            query_vec=vec,
            pattern=int(rec["labels"]["pattern"]),
            event=int(rec["labels"]["event"]),
            bottom_id=rec["bottom_id"],
            bottom_category=rec["labels"].get("bottom_category"),
            bottom_color=int(rec["labels"].get("bottom_color", -1)),
        ))
    if not queries:
        raise ConfigError("empty query set")
    return lexicon, cfg, store, event_model, event_categories, queries, test


def _entry_annotations(store: MemoryStore):
    ann = {}
    for e in store.entries:
        labels = e.metadata.get("labels", {})
        counts = e.metadata.get("bottom_counts", {})
        dominant = None
        if counts:
            dominant = min(counts.items(), key=lambda kv: (-kv[1], int(kv[0])))
            dominant = int(dominant[0])
        ann[e.bottom_id] = (labels.get("bottom_category"),
                            labels.get("bottom_color", dominant))
    return ann


def run_experiment(config: dict, out_dir) -> EvalReport:
    """Execute all three evaluation protocols and write the report grid."""
    lexicon, cfg, store, event_model, event_categories, queries, _ = _prepare(config)
    k_values = [int(k) for k in config.get("k_values", DEFAULT_K_VALUES)]
    seed = int(config.get("seed", 0))
    k_max = max(k_values)
    n_patterns = len(lexicon.patterns)
    n_events = len(event_categories)

    report = EvalReport(k_values=k_values, seed=seed)

    # ---- unconditioned protocol: label the top-k_max proposals of each query
    style_labels, event_labels = [], []
    for q in queries:
        ranked = _rank_entries(store, q.query_vec)[:k_max]
        s_row, e_row = [], []
        for entry, _score in ranked:
            match = classify_pair_style(q.query_hist, entry, lexicon, cfg)
            s_row.append(match.pattern)
            dist = classify_pair_event(q.query_hist, entry, lexicon,
                                       event_model, event_categories)
            e_row.append(int(event_categories[int(np.argmax(dist))]))
        style_labels.append(s_row)
        event_labels.append(e_row)

    style_targets = [q.pattern for q in queries]
    event_targets = [q.event for q in queries]
    style_prior = _empirical_prior(style_targets, n_patterns)
    event_prior = _empirical_prior(event_targets, n_events)

    for k in k_values:
        report.set("style", "accuracy", k, accuracy_at_k(style_labels, style_targets, k))
        report.set("style", "map", k, mean_average_precision(
            [[l == t for l in row] for row, t in zip(style_labels, style_targets)], k))
        report.set("event", "accuracy", k, accuracy_at_k(event_labels, event_targets, k))
        report.set("event", "map", k, mean_average_precision(
            [[l == t for l in row] for row, t in zip(event_labels, event_targets)], k))
        n_random = int(config.get("random_queries", 5000))
        acc, m_ap, _ = random_baseline(n_patterns, k, n_random, seed,
                                       label_prior=style_prior)
        report.set("style", "random_accuracy", k, acc)
        report.set("style", "random_map", k, m_ap)
        acc, m_ap, _ = random_baseline(n_events, k, n_random, seed + 1,
                                       label_prior=event_prior)
        report.set("event", "random_accuracy", k, acc)
        report.set("event", "random_map", k, m_ap)

    # ---- entropy protocol over pooled predicted labels
    rng = np.random.default_rng(seed + 2)
    for k in k_values:
        report.set("entropy_style", "entropy", k, recommendation_entropy(
            [[l + 1 for l in row] for row in style_labels], n_patterns, k))
        report.set("entropy_event", "entropy", k, recommendation_entropy(
            [[l + 1 for l in row] for row in event_labels], n_events, k))
        rand_style = [[int(v) + 1 for v in rng.choice(n_patterns, size=k,
                                                      p=style_prior)]
                      for _ in range(len(queries))]
        rand_event = [[int(v) + 1 for v in rng.choice(n_events, size=k,
                                                      p=event_prior)]
                      for _ in range(len(queries))]
        report.set("entropy_style", "random", k,
                   recommendation_entropy(rand_style, n_patterns, k))
        report.set("entropy_event", "random", k,
                   recommendation_entropy(rand_event, n_events, k))

    # ---- conditioned protocol: filter to the ground-truth category, then
    # measure category/color agreement with the true bottom
    annotations = _entry_annotations(store)
    classifiers = ConditioningClassifiers(style_cfg=cfg, event_model=event_model,
                                          event_categories=event_categories)
    for kind, target_of in (("style", lambda q: q.pattern),
                            ("event", lambda q: q.event)):
        prop_annotations, gt, relevance = [], [], []
        for q in queries:
            cond = Condition(kind=kind, target=target_of(q), mode="filter")
            rec = recommend_conditioned(
                store, _query_image_placeholder(), k_max, cond, classifiers,
                lexicon, query_id=q.source_id,
                _precomputed=(q.query_vec, q.query_hist))
            props = [annotations.get(p.bottom_id, (None, None))
                     for p in rec.proposals]
            prop_annotations.append(props)
            gt.append((q.bottom_category, q.bottom_color))
            relevance.append([
                p[0] == q.bottom_category and p[1] == q.bottom_color
                for p in props
            ])
        for k in k_values:
            from .metrics import category_color_accuracy

            cat, col, joint, _ = category_color_accuracy(prop_annotations, gt, k)
            proto = f"{kind}_conditioned"
            report.set(proto, "category_accuracy", k, cat)
            report.set(proto, "color_accuracy", k, col)
            report.set(proto, "cat_x_col_accuracy", k, joint)
            report.set(proto, "map", k, mean_average_precision(relevance, k))

    report.validate()
    report.write(out_dir)
    return report


def _empirical_prior(targets, n: int) -> np.ndarray:
    counts = np.bincount(np.asarray(targets), minlength=n).astype(np.float64)
    return counts / counts.sum()


def _query_image_placeholder():
    # recommend_conditioned short-circuits on precomputed features; the image
    # argument is unused in that path
    return None


def load_experiment_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"experiment config not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
