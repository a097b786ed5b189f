"""Non-redundant pairing memory and conditioned top-to-bottom recommendation.

The store keeps (top key, bottom feature) pairs whose joint distance to every
stored pair is at least ``tau``; retrieval ranks entries by cosine similarity
of the query top's histogram against stored keys, and conditioning re-checks
every proposed pairing through the style or event classifier.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .events import classify_event
from .knn import LabeledFeatureSet
from .lexicon import CisLexicon
from .preprocess import (
    ColorHistogram,
    EmptyForegroundError,
    GarmentImage,
    garment_histogram,
    load_garment_image,
    top3,
)
from .style import StyleClassifierConfig, StyleMatch, style_distance

STORE_VERSION = 1
DEFAULT_OVERFETCH = 4


@dataclass
class MemoryEntry:
    key: np.ndarray  # L2-normalized top feature
    bottom_id: str
    bottom_feature: np.ndarray  # L2-normalized bottom feature
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.key = _unit(np.asarray(self.key, dtype=np.float64))
        self.bottom_feature = _unit(np.asarray(self.bottom_feature, dtype=np.float64))


def _unit(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("zero feature vector")
    return v / norm


def joint_distance(a: MemoryEntry, b: MemoryEntry) -> float:
    """Mean of key distance and bottom-feature distance: redundancy concerns
    the pairing, not the top alone."""
    dk = float(np.linalg.norm(a.key - b.key))
    db = float(np.linalg.norm(a.bottom_feature - b.bottom_feature))
    return 0.5 * (dk + db)


@dataclass(frozen=True)
class WriteDecision:
    status: str  # stored | rejected-redundant | rejected-capacity | evicted+stored
    min_distance: float | None = None
    evicted_bottom_id: str | None = None


@dataclass
class MemoryStore:
    tau: float
    capacity: int | None = None
    entries: list[MemoryEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")

    def __len__(self):
        return len(self.entries)


def _nn_distances(entries: list[MemoryEntry]) -> np.ndarray:
    """Per-entry distance to its nearest other entry."""
    n = len(entries)
    out = np.full(n, np.inf)
    for i in range(n):
        for j in range(n):
            if i != j:
                d = joint_distance(entries[i], entries[j])
                if d < out[i]:
                    out[i] = d
    return out


def write(store: MemoryStore, candidate: MemoryEntry) -> WriteDecision:
    """Insert ``candidate`` unless it is redundant with a stored pairing."""
    if not store.entries:
        store.entries.append(candidate)
        return WriteDecision(status="stored")
    dists = [joint_distance(candidate, e) for e in store.entries]
    dmin = min(dists)
    if dmin < store.tau:
        return WriteDecision(status="rejected-redundant", min_distance=dmin)
    if store.capacity is not None and len(store.entries) >= store.capacity:
        # evict the entry contributing least to pairwise spread, but only if
        # the swap increases total spread
        nn = _nn_distances(store.entries)
        victim = int(np.argmin(nn))
        trial = [e for i, e in enumerate(store.entries) if i != victim] + [candidate]
        if float(_nn_distances(trial).sum()) > float(nn.sum()):
            evicted = store.entries[victim]
            store.entries = trial
            return WriteDecision(status="evicted+stored", min_distance=dmin,
                                 evicted_bottom_id=evicted.bottom_id)
        return WriteDecision(status="rejected-capacity", min_distance=dmin)
    store.entries.append(candidate)
    return WriteDecision(status="stored", min_distance=dmin)


@dataclass
class Proposal:
    bottom_id: str
    score: float
    style: StyleMatch | None = None
    event_posterior: np.ndarray | None = None


@dataclass
class RankedRecommendation:
    query_id: str
    proposals: list[Proposal]
    requested_k: int

    @property
    def shortfall(self) -> int:
        return max(0, self.requested_k - len(self.proposals))


def _rank_entries(store: MemoryStore, query_vec: np.ndarray):
    """All entries sorted by cosine similarity, distinct bottom_ids only."""
    keys = np.stack([e.key for e in store.entries])
    scores = keys @ query_vec
    order = sorted(range(len(store.entries)),
                   key=lambda i: (-scores[i], store.entries[i].bottom_id))
    ranked = []
    seen = set()
    for i in order:
        bid = store.entries[i].bottom_id
        if bid in seen:
            continue
        seen.add(bid)
        ranked.append((store.entries[i], float(scores[i])))
    return ranked


def query_features(query_top: GarmentImage, lexicon: CisLexicon,
                   eps_bg: float = 0.0) -> tuple[np.ndarray, ColorHistogram]:
    hist = garment_histogram(query_top, lexicon, eps_bg=eps_bg)
    return hist.to_vector(lexicon, normalize="l2"), hist


def recommend(store: MemoryStore, query_top: GarmentImage, k: int,
              lexicon: CisLexicon, query_id: str = "",
              eps_bg: float = 0.0) -> RankedRecommendation:
    """Top-k bottoms for a query top, ranked by key cosine similarity."""
    if not store.entries:
        raise ValueError("memory store is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    vec, _ = query_features(query_top, lexicon, eps_bg=eps_bg)
    ranked = _rank_entries(store, vec)[:k]
    return RankedRecommendation(
        query_id=query_id or query_top.source_id,
        proposals=[Proposal(bottom_id=e.bottom_id, score=s) for e, s in ranked],
        requested_k=k,
    )


@dataclass(frozen=True)
class Condition:
    kind: str = "none"  # none | style | event
    target: int | None = None
    mode: str = "filter"  # filter | rerank
    min_posterior: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "style", "event"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.mode not in ("filter", "rerank"):
            raise ValueError(f"unknown condition mode {self.mode!r}")
        if (self.target is None) != (self.kind == "none"):
            raise ValueError("target must be set iff kind != none")
        if not (0.0 <= self.min_posterior <= 1.0):
            raise ValueError("min_posterior must be in [0,1]")


@dataclass
class ConditioningClassifiers:
    style_cfg: StyleClassifierConfig | None = None
    event_model: LabeledFeatureSet | None = None
    event_categories: np.ndarray | None = None  # category ids, ascending


def pair_histogram(query_hist: ColorHistogram, entry: MemoryEntry) -> ColorHistogram:
    """Histogram of the query top combined with the stored bottom's counts."""
    counts = entry.metadata.get("bottom_counts")
    if counts is None:
        raise ValueError(f"entry {entry.bottom_id} has no stored bottom_counts")
    bottom = ColorHistogram(counts={int(k): int(v) for k, v in counts.items()},
                            total=sum(int(v) for v in counts.values()))
    return query_hist.add(bottom)


def classify_pair_style(query_hist: ColorHistogram, entry: MemoryEntry,
                        lexicon: CisLexicon, cfg: StyleClassifierConfig) -> StyleMatch:
    return style_distance(top3(pair_histogram(query_hist, entry)), lexicon, cfg)


def classify_pair_event(query_hist: ColorHistogram, entry: MemoryEntry,
                        lexicon: CisLexicon, model: LabeledFeatureSet,
                        categories: np.ndarray) -> np.ndarray:
    from .knn import vote_distribution

    vec = pair_histogram(query_hist, entry).to_vector(lexicon, normalize="l2")
    return vote_distribution(model, vec, categories)


def recommend_conditioned(store: MemoryStore, query_top: GarmentImage, k: int,
                          cond: Condition, classifiers: ConditioningClassifiers,
                          lexicon: CisLexicon, query_id: str = "",
                          overfetch: int = DEFAULT_OVERFETCH,
                          eps_bg: float = 0.0,
                          _precomputed=None) -> RankedRecommendation:
    """Recommendation with per-pair style/event conditioning.

    Over-fetches ``overfetch * k`` candidates, classifies each (top, bottom)
    pairing, then filters or reranks. May return fewer than k proposals; the
    shortfall is reported on the result rather than refilled. ``_precomputed``
    takes an already-extracted (vector, histogram) pair for batch callers.
    """
    if cond.kind == "none":
        return recommend(store, query_top, k, lexicon, query_id=query_id, eps_bg=eps_bg)
    if not store.entries:
        raise ValueError("memory store is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    if _precomputed is not None:
        vec, query_hist = _precomputed
    else:
        vec, query_hist = query_features(query_top, lexicon, eps_bg=eps_bg)
    candidates = _rank_entries(store, vec)[: overfetch * k]

    proposals = []
    for entry, score in candidates:
        try:
            if cond.kind == "style":
                if classifiers.style_cfg is None:
                    raise ValueError("style conditioning requires style_cfg")
                match = classify_pair_style(query_hist, entry, lexicon,
                                            classifiers.style_cfg)
                posterior = 1.0 if (match.accepted and match.pattern == cond.target) else 0.0
                prop = Proposal(bottom_id=entry.bottom_id, score=score, style=match)
            else:
                if classifiers.event_model is None:
                    raise ValueError("event conditioning requires event_model")
                cats = classifiers.event_categories
                if cats is None:
                    cats = np.unique(classifiers.event_model.labels)
                dist = classify_pair_event(query_hist, entry, lexicon,
                                           classifiers.event_model, cats)
                target_pos = int(np.searchsorted(cats, cond.target))
                hit = (cats[int(np.argmax(dist))] == cond.target
                       and dist[target_pos] >= cond.min_posterior)
                posterior = float(dist[target_pos])
                prop = Proposal(bottom_id=entry.bottom_id, score=score,
                                event_posterior=dist)
        except (ValueError, EmptyForegroundError) as exc:
            import logging

            logging.getLogger(__name__).warning(
                "dropping candidate %s: %s", entry.bottom_id, exc)
            continue
        if cond.mode == "filter":
            keep = posterior > 0.0 if cond.kind == "style" else hit
            if keep:
                proposals.append(prop)
        else:
            prop.score = score * posterior
            proposals.append(prop)
    proposals.sort(key=lambda p: (-p.score, p.bottom_id))
    return RankedRecommendation(query_id=query_id or query_top.source_id,
                                proposals=proposals[:k], requested_k=k)


@dataclass
class BuildStats:
    stored: int = 0
    rejected: int = 0
    evicted: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)


def entry_from_images(rec: dict, lexicon: CisLexicon, eps_bg: float = 0.0,
                      image_root=None) -> MemoryEntry:
    """Build a memory entry from an outfit manifest record."""
    def _path(p):
        if p is None:
            return None
        if image_root is not None and not str(p).startswith("/"):
            return str(Path(image_root) / p)
        return p

    sid = rec.get("source_id", "")
    top = load_garment_image(_path(rec["top_image"]), _path(rec.get("top_mask")),
                             source_id=sid)
    bottom = load_garment_image(_path(rec["bottom_image"]),
                                _path(rec.get("bottom_mask")), source_id=sid)
    top_hist = garment_histogram(top, lexicon, eps_bg=eps_bg)
    bottom_hist = garment_histogram(bottom, lexicon, eps_bg=eps_bg)
    return MemoryEntry(
        key=top_hist.to_vector(lexicon, normalize="l2"),
        bottom_id=rec.get("bottom_id", f"{sid}:bottom"),
        bottom_feature=bottom_hist.to_vector(lexicon, normalize="l2"),
        metadata={
            "source_id": sid,
            "labels": rec.get("labels", {}),
            "bottom_counts": {str(k): v for k, v in bottom_hist.counts.items()},
        },
    )


def build_memory(records, tau: float, capacity: int | None,
                 lexicon: CisLexicon, eps_bg: float = 0.0,
                 image_root=None) -> tuple[MemoryStore, BuildStats]:
    """Populate a store from an outfit manifest in ascending source_id order."""
    store = MemoryStore(tau=tau, capacity=capacity)
    stats = BuildStats()
    for rec in sorted(records, key=lambda r: r.get("source_id", "")):
        try:
            entry = entry_from_images(rec, lexicon, eps_bg=eps_bg,
                                      image_root=image_root)
        except (EmptyForegroundError, FileNotFoundError, KeyError, ValueError) as exc:
            stats.errors.append((rec.get("source_id", ""), str(exc)))
            continue
        decision = write(store, entry)
        if decision.status in ("stored", "evicted+stored"):
            stats.stored += 1
            if decision.status == "evicted+stored":
                stats.evicted += 1
        else:
            stats.rejected += 1
    return store, stats


def save_store(store: MemoryStore, path):
    doc = {
        "store_version": STORE_VERSION,
        "tau": store.tau,
        "capacity": store.capacity,
        "dim": len(store.entries[0].key) if store.entries else 0,
        "entries": [
            {
                "key": e.key.tolist(),
                "bottom_id": e.bottom_id,
                "bottom_feature": e.bottom_feature.tolist(),
                "metadata": e.metadata,
            }
            for e in store.entries
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_store(path) -> MemoryStore:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("store_version") != STORE_VERSION:
        raise ValueError(f"unsupported store_version {doc.get('store_version')!r}")
    store = MemoryStore(tau=float(doc["tau"]), capacity=doc.get("capacity"))
    store.entries = [
        MemoryEntry(
            key=np.asarray(e["key"], dtype=np.float64),
            bottom_id=e["bottom_id"],
            bottom_feature=np.asarray(e["bottom_feature"], dtype=np.float64),
            metadata=e.get("metadata", {}),
        )
        for e in doc["entries"]
    ]
    return store


class MemoryRecommender(BaseEstimator):
    """Estimator-style wrapper: fit on an outfit manifest, then recommend."""

    def __init__(self, tau: float = 0.1, capacity: int | None = None,
                 eps_bg: float = 0.0):
        self.tau = tau
        self.capacity = capacity
        self.eps_bg = eps_bg

    def fit(self, records, lexicon: CisLexicon, image_root=None):
        self.lexicon_ = lexicon
        self.store_, self.build_stats_ = build_memory(
            records, tau=self.tau, capacity=self.capacity, lexicon=lexicon,
            eps_bg=self.eps_bg, image_root=image_root)
        return self

    def recommend(self, query_top: GarmentImage, k: int,
                  cond: Condition | None = None,
                  classifiers: ConditioningClassifiers | None = None):
        if cond is None or cond.kind == "none":
            return recommend(self.store_, query_top, k, self.lexicon_,
                             eps_bg=self.eps_bg)
        return recommend_conditioned(self.store_, query_top, k, cond,
                                     classifiers or ConditioningClassifiers(),
                                     self.lexicon_, eps_bg=self.eps_bg)
