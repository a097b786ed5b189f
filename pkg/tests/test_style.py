import itertools

import numpy as np
import pytest

from stylerec.knn import LabeledFeatureSet, knn_classify
from stylerec.lexicon import make_synthetic_lexicon
from stylerec.preprocess import (
    EmptyForegroundError,
    GarmentImage,
    OutfitTriple,
    outfit_concat_features,
    top3,
)
from stylerec.style import (
    PERMUTATIONS,
    StyleClassifierConfig,
    StyleMatch,
    build_label_dataset,
    calibrate_theta,
    classify_style,
    style_distance,
)

from conftest import image_of_colors

CFG = StyleClassifierConfig(theta=50.0)


def brute_force_match(outfit, lexicon, variant="l2"):
    """Exhaustive scan over every (permutation, triplet) pair."""
    vecs = lexicon.color_vectors(np.asarray(outfit.colors))
    best = None
    for t_idx, trip in enumerate(lexicon.triplets):
        target = lexicon.color_vectors(np.asarray(trip.color_ids)).reshape(9)
        for p_idx, perm in enumerate(PERMUTATIONS):
            d = np.linalg.norm(vecs[list(perm)].reshape(9) - target)
            if variant == "sqrt_l2":
                d = np.sqrt(d)
            key = (d, t_idx, p_idx)
            if best is None or key < best:
                best = key
    return best  # (d_star, triplet index, permutation index)


def test_reversed_triplet_is_zero_distance(tiny_lexicon):
    trip = tiny_lexicon.triplets[1]  # (2, 3, 4)
    outfit = OutfitTriple(colors=tuple(reversed(trip.color_ids)))
    match = style_distance(outfit, tiny_lexicon, CFG)
    assert match.d_star == 0.0
    assert match.accepted
    assert match.pattern == trip.pattern_id
    assert match.matched_triplet == 1


def test_matches_brute_force_oracle(tiny_lexicon):
    rng = np.random.default_rng(12)
    for _ in range(50):
        outfit = OutfitTriple(colors=tuple(int(c) for c in rng.integers(0, 6, 3)))
        match = style_distance(outfit, tiny_lexicon, CFG)
        d, t, p = brute_force_match(outfit, tiny_lexicon)
        assert match.d_star == d
        assert (match.matched_triplet, match.permutation) == (t, p)


def test_far_outfit_rejected_with_small_theta(tiny_lexicon):
    cfg = StyleClassifierConfig(theta=1e-9)
    outfit = OutfitTriple(colors=(5, 5, 5))
    assert not style_distance(outfit, tiny_lexicon, cfg).accepted


def test_permutation_of_outfit_is_invariant(tiny_lexicon):
    rng = np.random.default_rng(2)
    for _ in range(30):
        colors = tuple(int(c) for c in rng.integers(0, 6, 3))
        base = style_distance(OutfitTriple(colors=colors), tiny_lexicon, CFG)
        for perm in itertools.permutations(colors):
            m = style_distance(OutfitTriple(colors=perm), tiny_lexicon, CFG)
            assert m.d_star == base.d_star
            assert m.matched_triplet == base.matched_triplet


def test_sqrt_variant_same_argmin():
    lex = make_synthetic_lexicon(20, 12, 4, seed=21)
    rng = np.random.default_rng(5)
    cfg_sqrt = StyleClassifierConfig(theta=50.0, distance_variant="sqrt_l2")
    for _ in range(60):
        outfit = OutfitTriple(colors=tuple(int(c) for c in rng.integers(0, 20, 3)))
        a = style_distance(outfit, lex, CFG)
        b = style_distance(outfit, lex, cfg_sqrt)
        assert a.matched_triplet == b.matched_triplet
        assert a.permutation == b.permutation
        assert b.d_star == pytest.approx(np.sqrt(a.d_star))


def test_zero_iff_permutation_of_lexicon_triplet(tiny_lexicon):
    rng = np.random.default_rng(8)
    triplet_sets = [tuple(sorted(t.color_ids)) for t in tiny_lexicon.triplets]
    for _ in range(100):
        colors = tuple(int(c) for c in rng.integers(0, 6, 3))
        m = style_distance(OutfitTriple(colors=colors), tiny_lexicon, CFG)
        if tuple(sorted(colors)) in triplet_sets:
            assert m.d_star == 0.0
        else:
            assert m.d_star > 0.0


def test_classify_style_exact_triplet(tiny_lexicon):
    trip = tiny_lexicon.triplets[1]
    c0, c1, c2 = (tiny_lexicon.color(i).rgb for i in trip.color_ids)
    top = image_of_colors([(c0, 6), (c2, 2)])
    bottom = image_of_colors([(c1, 5), (c2, 1)])
    match = classify_style(top, bottom, tiny_lexicon, CFG)
    assert match.d_star == 0.0
    assert match.pattern == trip.pattern_id


def test_classify_style_equals_manual_staging(tiny_lexicon):
    rng = np.random.default_rng(17)
    ids = [c.id for c in tiny_lexicon.palette]
    for _ in range(50):
        top = image_of_colors([
            (tiny_lexicon.color(int(rng.choice(ids))).rgb, int(rng.integers(1, 8)))
            for _ in range(3)
        ])
        bottom = image_of_colors([
            (tiny_lexicon.color(int(rng.choice(ids))).rgb, int(rng.integers(1, 8)))
            for _ in range(2)
        ])
        pipeline = classify_style(top, bottom, tiny_lexicon, CFG)
        staged = style_distance(
            top3(outfit_concat_features(top, bottom, tiny_lexicon)),
            tiny_lexicon, CFG)
        assert pipeline == staged


def test_classify_style_all_black_raises(tiny_lexicon):
    black = GarmentImage(pixels=np.zeros((3, 3, 3), dtype=np.uint8))
    with pytest.raises(EmptyForegroundError):
        classify_style(black, black, tiny_lexicon, CFG)


def test_theta_must_be_positive():
    with pytest.raises(ValueError):
        StyleClassifierConfig(theta=0.0)


def test_calibrate_theta_percentile():
    assert calibrate_theta(range(1, 101), percentile=90) == pytest.approx(90.1)


# --- k-NN baseline ---------------------------------------------------------

def test_knn_exact_match_k1():
    feats = np.eye(4)
    fs = LabeledFeatureSet(features=feats, labels=np.array([3, 1, 4, 1]), k=1)
    label, idx = knn_classify(fs, feats[2])
    assert label == 4
    assert idx[0] == 2


def test_knn_hand_placed_points():
    feats = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    fs = LabeledFeatureSet(features=feats, labels=np.array([0, 1, 2]), k=1)
    # (0.6, 0) is closest to (1, 0): distances 0.6, 0.4, ~2.09
    label, _ = knn_classify(fs, np.array([0.6, 0.0]))
    assert label == 1


def test_knn_majority_vote():
    feats = np.array([[0.0], [0.1], [0.2], [5.0]])
    fs = LabeledFeatureSet(features=feats, labels=np.array([7, 7, 9, 9]), k=3)
    label, _ = knn_classify(fs, np.array([0.0]))
    assert label == 7


def test_knn_dimension_mismatch():
    fs = LabeledFeatureSet(features=np.zeros((2, 3)), labels=np.array([0, 1]), k=1)
    with pytest.raises(ValueError, match="dimension"):
        knn_classify(fs, np.zeros(4))


def test_knn_self_label_property():
    rng = np.random.default_rng(6)
    feats = rng.random((25, 5))
    labels = rng.integers(0, 4, 25)
    fs = LabeledFeatureSet(features=feats, labels=labels, k=1)
    for i in range(25):
        label, _ = knn_classify(fs, feats[i])
        assert label == labels[i]


# --- batch labeling --------------------------------------------------------

def make_manifest(tmp_path, tiny_lexicon, n, rng, exact=True):
    from PIL import Image

    records = []
    # repeated-color triplets can never be matched exactly (top-3 padding
    # yields a different multiset), so the exact construction avoids them
    exact_pool = [t for t in tiny_lexicon.triplets if len(set(t.color_ids)) == 3]
    for i in range(n):
        trip = exact_pool[int(rng.integers(len(exact_pool)))]
        c0, c1, c2 = (tiny_lexicon.color(j).rgb for j in trip.color_ids)
        if exact:
            top = image_of_colors([(c0, 6), (c2, 2)])
            bottom = image_of_colors([(c1, 5), (c2, 1)])
        else:
            top = image_of_colors([(tuple(int(v) for v in rng.integers(1, 256, 3)), 8)])
            bottom = image_of_colors([(tuple(int(v) for v in rng.integers(1, 256, 3)), 8)])
        tp = tmp_path / f"t{i}.png"
        bp = tmp_path / f"b{i}.png"
        tm = tmp_path / f"t{i}_mask.png"
        bm = tmp_path / f"b{i}_mask.png"
        Image.fromarray(top.pixels).save(tp)
        Image.fromarray(bottom.pixels).save(bp)
        # masks keep palette-black pixels countable as foreground
        Image.fromarray(top.mask.astype(np.uint8) * 255).save(tm)
        Image.fromarray(bottom.mask.astype(np.uint8) * 255).save(bm)
        records.append({"source_id": f"o{i:03d}", "top_image": str(tp),
                        "bottom_image": str(bp), "top_mask": str(tm),
                        "bottom_mask": str(bm)})
    return records


def test_exact_batch_zero_rejections(tmp_path, tiny_lexicon):
    rng = np.random.default_rng(3)
    records = make_manifest(tmp_path, tiny_lexicon, 10, rng, exact=True)
    labeled, stats = build_label_dataset(records, tiny_lexicon, CFG)
    assert stats.rejected == 0
    assert stats.labeled == 10


def test_tiny_theta_rejects_inexact(tmp_path, tiny_lexicon):
    rng = np.random.default_rng(13)
    records = make_manifest(tmp_path, tiny_lexicon, 8, rng, exact=False)
    cfg = StyleClassifierConfig(theta=1e-12)
    labeled, stats = build_label_dataset(records, tiny_lexicon, cfg)
    assert stats.labeled == 0
    assert stats.rejected == 8


def test_distribution_matches_per_record_oracle(tmp_path, tiny_lexicon):
    rng = np.random.default_rng(23)
    records = make_manifest(tmp_path, tiny_lexicon, 30, rng, exact=True)
    labeled, stats = build_label_dataset(records, tiny_lexicon, CFG)
    expected = {}
    for rec in labeled:
        expected[rec["pattern"]] = expected.get(rec["pattern"], 0) + 1
    assert dict(stats.pattern_counts) == expected


def test_excluded_pattern_dropped(tmp_path, tiny_lexicon):
    rng = np.random.default_rng(3)
    records = make_manifest(tmp_path, tiny_lexicon, 10, rng, exact=True)
    labeled, stats = build_label_dataset(records, tiny_lexicon, CFG,
                                         exclude_patterns=("alpha",))
    assert stats.labeled + stats.excluded == 10
    assert all(r["pattern_name"] != "alpha" for r in labeled)


def test_per_record_errors_do_not_abort(tmp_path, tiny_lexicon):
    rng = np.random.default_rng(3)
    records = make_manifest(tmp_path, tiny_lexicon, 4, rng, exact=True)
    records.append({"source_id": "missing", "top_image": "/nope.png",
                    "bottom_image": "/nope.png"})
    labeled, stats = build_label_dataset(records, tiny_lexicon, CFG)
    assert stats.labeled == 4
    assert len(stats.errors) == 1
    assert stats.errors[0][0] == "missing"
