"""Triplet-distance style matching and dataset labeling.

An outfit's three dominant palette colors are compared against every lexicon
triplet under every permutation; the closest match assigns a style pattern,
and matches farther than a threshold ``theta`` are rejected as styleless.
"""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .lexicon import CisLexicon
from .preprocess import (
    EmptyForegroundError,
    GarmentImage,
    OutfitTriple,
    load_garment_image,
    outfit_concat_features,
    top3,
)

# fixed permutation indexing: lexicographic order of index permutations
PERMUTATIONS = tuple(itertools.permutations(range(3)))


@dataclass(frozen=True)
class StyleClassifierConfig:
    theta: float
    distance_variant: str = "l2"  # "l2" | "sqrt_l2"
    eps_bg: float = 0.0

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.distance_variant not in ("l2", "sqrt_l2"):
            raise ValueError(f"unknown distance_variant {self.distance_variant!r}")


@dataclass(frozen=True)
class StyleMatch:
    d_star: float
    matched_triplet: int  # index into lexicon.triplets
    permutation: int  # index into PERMUTATIONS
    pattern: int  # StylePattern id
    accepted: bool


def _triplet_matrix(lexicon: CisLexicon) -> np.ndarray:
    """(n_triplets, 9) matrix of concatenated triplet color vectors."""
    ids = np.array([t.color_ids for t in lexicon.triplets])  # (n, 3)
    return lexicon.color_vectors(ids.reshape(-1)).reshape(len(lexicon.triplets), 9)


def style_distance(outfit: OutfitTriple, lexicon: CisLexicon,
                   cfg: StyleClassifierConfig) -> StyleMatch:
    """Minimum distance between the outfit triple and any lexicon triplet.

    The minimum ranges over all 6 orderings of the outfit colors; distances
    compare 9-dimensional concatenations in the lexicon's color space. Ties
    resolve to the lowest triplet index, then the lowest permutation index.
    """
    if not lexicon.triplets:
        raise ValueError("lexicon has no triplets")
    outfit_vecs = lexicon.color_vectors(np.asarray(outfit.colors))  # (3, 3)
    targets = _triplet_matrix(lexicon)  # (n, 9)
    # distances for all 6 permutations at once: (6, n)
    permuted = np.stack([outfit_vecs[list(p)].reshape(9) for p in PERMUTATIONS])
    d = np.linalg.norm(permuted[:, None, :] - targets[None, :, :], axis=2)
    if cfg.distance_variant == "sqrt_l2":
        d = np.sqrt(d)
    best = d.min()
    perms, trips = np.nonzero(d == best)
    # lowest triplet index first, then lowest permutation index
    order = np.lexsort((perms, trips))
    p_idx, t_idx = int(perms[order[0]]), int(trips[order[0]])
    return StyleMatch(
        d_star=float(best),
        matched_triplet=t_idx,
        permutation=p_idx,
        pattern=lexicon.triplets[t_idx].pattern_id,
        accepted=bool(best < cfg.theta),
    )


def classify_style(top: GarmentImage, bottom: GarmentImage, lexicon: CisLexicon,
                   cfg: StyleClassifierConfig) -> StyleMatch:
    """Full pipeline: concatenated foreground histogram, top-3, triplet match."""
    hist = outfit_concat_features(top, bottom, lexicon, eps_bg=cfg.eps_bg)
    return style_distance(top3(hist), lexicon, cfg)


def calibrate_theta(d_stars, percentile: float = 90.0) -> float:
    """Pick theta at a percentile of observed match distances on a validation batch."""
    arr = np.asarray(list(d_stars), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no distances to calibrate on")
    return float(np.percentile(arr, percentile))


@dataclass
class LabelingStats:
    labeled: int = 0
    rejected: int = 0
    excluded: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)
    pattern_counts: Counter = field(default_factory=Counter)


def build_label_dataset(records, lexicon: CisLexicon, cfg: StyleClassifierConfig,
                        exclude_patterns: tuple[str, ...] = (),
                        image_root=None):
    """Label a batch of outfit records, dropping unclear or excluded styles.

    Each record needs ``source_id``, ``top_image`` and ``bottom_image`` paths
    (optionally ``top_mask`` / ``bottom_mask``). Per-record failures are
    recorded in the stats and the batch continues. Output order follows
    ascending source_id so results are worker-count independent.
    """
    excluded_ids = {p.id for p in lexicon.patterns if p.name in exclude_patterns}
    unknown = set(exclude_patterns) - {p.name for p in lexicon.patterns}
    if unknown:
        raise ValueError(f"unknown excluded pattern(s): {sorted(unknown)}")

    stats = LabelingStats()
    labeled = []
    for rec in sorted(records, key=lambda r: r.get("source_id", "")):
        sid = rec.get("source_id", "")
        try:
            top = _load_record_image(rec, "top_image", "top_mask", sid, image_root)
            bottom = _load_record_image(rec, "bottom_image", "bottom_mask", sid, image_root)
            match = classify_style(top, bottom, lexicon, cfg)
        except (EmptyForegroundError, FileNotFoundError, KeyError, ValueError) as exc:
            stats.errors.append((sid, str(exc)))
            continue
        if not match.accepted:
            stats.rejected += 1
            continue
        if match.pattern in excluded_ids:
            stats.excluded += 1
            continue
        stats.labeled += 1
        stats.pattern_counts[match.pattern] += 1
        labeled.append({
            "source_id": sid,
            "d_star": match.d_star,
            "pattern": match.pattern,
            "pattern_name": lexicon.pattern(match.pattern).name,
            "accepted": match.accepted,
            "matched_triplet": match.matched_triplet,
        })
    return labeled, stats


def _load_record_image(rec, image_key, mask_key, sid, image_root):
    path = rec[image_key]
    mask = rec.get(mask_key)
    if image_root is not None:
        path = str(image_root / path) if not str(path).startswith("/") else path
        if mask is not None and not str(mask).startswith("/"):
            mask = str(image_root / mask)
    return load_garment_image(path, mask, source_id=sid)
