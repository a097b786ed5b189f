"""Brute-force nearest-neighbor classification over histogram features.

Deterministic by construction: neighbor order breaks distance ties on entry
index, and vote ties break on smaller summed neighbor distance, then lower
label id.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted


@dataclass
class LabeledFeatureSet:
    """Feature/label pairs plus the neighbor count to vote with."""

    features: np.ndarray  # (n, d), rows L2-normalized histograms
    labels: np.ndarray  # (n,) integer category ids
    k: int = 1

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.labels) != len(self.features):
            raise ValueError("features and labels length mismatch")
        if not (1 <= self.k <= len(self.features)):
            raise ValueError(f"k={self.k} out of range for {len(self.features)} entries")


def nearest_indices(features: np.ndarray, query: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows to ``query``, ties by lower index."""
    d = np.linalg.norm(features - query[None, :], axis=1)
    order = np.lexsort((np.arange(len(d)), d))
    return order[:k]


def knn_classify(feature_set: LabeledFeatureSet, query: np.ndarray):
    """Majority-vote label among the k nearest entries.

    Returns ``(label, neighbor_indices)``. Vote ties go to the label with the
    smaller summed neighbor distance, then the lower label id.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (feature_set.features.shape[1],):
        raise ValueError(
            f"query dimension {query.shape} does not match features "
            f"{feature_set.features.shape[1]}"
        )
    idx = nearest_indices(feature_set.features, query, feature_set.k)
    dists = np.linalg.norm(feature_set.features[idx] - query[None, :], axis=1)
    votes: dict[int, list[float]] = {}
    for i, dist in zip(idx, dists):
        votes.setdefault(int(feature_set.labels[i]), []).append(float(dist))
    best = min(votes.items(), key=lambda kv: (-len(kv[1]), sum(kv[1]), kv[0]))
    return best[0], idx


def vote_distribution(feature_set: LabeledFeatureSet, query: np.ndarray,
                      categories: np.ndarray) -> np.ndarray:
    """Neighbor-vote fractions over ``categories``; sums to 1."""
    idx = nearest_indices(feature_set.features, query, feature_set.k)
    probs = np.zeros(len(categories), dtype=np.float64)
    pos = {int(c): i for i, c in enumerate(categories)}
    for i in idx:
        probs[pos[int(feature_set.labels[i])]] += 1.0
    return probs / feature_set.k


class NearestNeighborClassifier(BaseEstimator, ClassifierMixin):
    """Brute-force k-NN with the deterministic tie rules above.

    Parameters
    ----------
    k : neighbor count used for voting; ``k=1`` transfers the label of the
        single closest training sample.
    """

    def __init__(self, k: int = 1):
        self.k = k

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if len(y) != len(X):
            raise ValueError("X and y length mismatch")
        self.classes_ = np.unique(y)
        self.feature_set_ = LabeledFeatureSet(features=X, labels=y, k=self.k)
        return self

    def predict(self, X):
        check_is_fitted(self, "feature_set_")
        X = check_array(X, dtype=np.float64)
        return np.array([knn_classify(self.feature_set_, x)[0] for x in X],
                        dtype=np.int64)

    def predict_proba(self, X):
        check_is_fitted(self, "feature_set_")
        X = check_array(X, dtype=np.float64)
        return np.stack([
            vote_distribution(self.feature_set_, x, self.classes_) for x in X
        ])
