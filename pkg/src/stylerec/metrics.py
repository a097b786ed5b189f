"""Evaluation metrics: accuracy@k, mAP, entropy diversity, random baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabelDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if (p < 0).any():
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        object.__setattr__(self, "probs", p)


def accuracy_at_k(recommendations, targets, k: int) -> float:
    """Fraction of queries whose top-k predicted labels contain the target."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(recommendations) != len(targets):
        raise ValueError("recommendations and targets length mismatch")
    hits = sum(1 for recs, t in zip(recommendations, targets) if t in recs[:k])
    return hits / len(targets)


def average_precision(relevance, k: int) -> float:
    """AP truncated at k: mean precision at each relevant rank; 0 if no hits."""
    rel = list(relevance)[:k]
    hits = 0
    precisions = []
    for i, r in enumerate(rel, start=1):
        if r:
            hits += 1
            precisions.append(hits / i)
    if not precisions:
        return 0.0
    return float(np.mean(precisions))


def mean_average_precision(relevance_lists, k: int) -> float:
    """Mean of per-query average precision truncated at k."""
    if not relevance_lists:
        raise ValueError("no queries")
    return float(np.mean([average_precision(r, k) for r in relevance_lists]))


def shannon_entropy(dist: LabelDistribution) -> float:
    """Entropy in nats; 0 * log 0 counts as 0."""
    p = dist.probs
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def pooled_distribution(recommendations, n_categories: int, k: int | None = None) -> LabelDistribution:
    """Empirical distribution of all top-k predicted labels, pooled over queries."""
    counts = np.zeros(n_categories, dtype=np.float64)
    for recs in recommendations:
        for label in (recs if k is None else recs[:k]):
            if not (1 <= label <= n_categories):
                raise ValueError(f"label {label} outside [1..{n_categories}]")
            counts[label - 1] += 1
    total = counts.sum()
    if total == 0:
        raise ValueError("no labels pooled")
    return LabelDistribution(probs=counts / total)


def recommendation_entropy(recommendations, n_categories: int,
                           k: int | None = None) -> float:
    """Diversity of a run: entropy of the pooled predicted-label distribution."""
    return shannon_entropy(pooled_distribution(recommendations, n_categories, k))


def random_baseline(n_categories: int, k: int, num_queries: int, seed: int,
                    label_prior=None):
    """Random-label baseline: draws k labels per query i.i.d. from the prior.

    Returns ``(accuracy@k, mAP@k, entropy)``. With a uniform prior accuracy
    converges to 1 - (1 - 1/N)^k.
    """
    if n_categories < 2:
        raise ValueError("need at least 2 categories")
    rng = np.random.default_rng(seed)
    if label_prior is None:
        prior = np.full(n_categories, 1.0 / n_categories)
    else:
        prior = LabelDistribution(probs=np.asarray(label_prior)).probs
    labels = rng.choice(n_categories, size=(num_queries, k), p=prior) + 1
    targets = rng.choice(n_categories, size=num_queries, p=prior) + 1
    acc = float((labels == targets[:, None]).any(axis=1).mean())
    rel = labels == targets[:, None]
    m_ap = mean_average_precision(list(rel), k)
    ent = recommendation_entropy([list(row) for row in labels], n_categories)
    return acc, m_ap, ent


def category_color_accuracy(proposals, ground_truth, k: int):
    """Per-k hit fractions on garment category, dominant color, and both.

    ``proposals`` is per-query lists of (category, color) annotation pairs in
    rank order; ``ground_truth`` is per-query (category, color). Queries with
    missing annotations are skipped; the skip count is returned last.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cat_hits = col_hits = joint_hits = 0
    used = skipped = 0
    for props, gt in zip(proposals, ground_truth):
        if gt is None or gt[0] is None or gt[1] is None:
            skipped += 1
            continue
        topk = [p for p in props[:k] if p[0] is not None and p[1] is not None]
        if not topk:
            skipped += 1
            continue
        used += 1
        cat_hits += any(p[0] == gt[0] for p in topk)
        col_hits += any(p[1] == gt[1] for p in topk)
        joint_hits += any(p[0] == gt[0] and p[1] == gt[1] for p in topk)
    if used == 0:
        raise ValueError("no queries with complete annotations")
    return cat_hits / used, col_hits / used, joint_hits / used, skipped
