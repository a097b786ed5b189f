import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stylerec.metrics import (
    LabelDistribution,
    accuracy_at_k,
    average_precision,
    category_color_accuracy,
    mean_average_precision,
    pooled_distribution,
    random_baseline,
    recommendation_entropy,
    shannon_entropy,
)


def test_accuracy_perfect_top1():
    recs = [[1, 2, 3], [2, 1, 3], [3, 3, 3]]
    targets = [1, 2, 3]
    for k in (1, 2, 3):
        assert accuracy_at_k(recs, targets, k) == 1.0


def test_accuracy_ranks_case():
    # targets present at ranks 1, 3, 7, never
    recs = [
        [9] * 0 + [5] + [0] * 9,
        [0, 0, 5] + [0] * 7,
        [0] * 6 + [5] + [0] * 3,
        [0] * 10,
    ]
    targets = [5, 5, 5, 5]
    assert accuracy_at_k(recs, targets, 5) == 0.5


def test_accuracy_k_zero_forbidden():
    with pytest.raises(ValueError):
        accuracy_at_k([[1]], [1], 0)


def test_ap_single_relevant_rank1():
    assert average_precision([True, False, False], 5) == 1.0


def test_map_hand_case_ranks_2_and_4():
    # AP = (1/2 + 2/4) / 2 = 0.5
    rel = [False, True, False, True, False]
    assert mean_average_precision([rel], 5) == 0.5


def test_ap_no_relevant_is_zero():
    assert average_precision([False] * 5, 5) == 0.0


def test_entropy_one_hot_is_zero():
    assert shannon_entropy(LabelDistribution(probs=np.array([1.0, 0, 0]))) == 0.0


def test_entropy_uniform_is_ln_n():
    h = shannon_entropy(LabelDistribution(probs=np.full(4, 0.25)))
    assert h == pytest.approx(math.log(4), abs=1e-12)


def test_entropy_derived_case():
    # -0.5 ln 0.5 - 2 * 0.25 ln 0.25 = 1.5 ln 2
    h = shannon_entropy(LabelDistribution(probs=np.array([0.5, 0.25, 0.25])))
    assert h == pytest.approx(1.0397207708399179, abs=1e-12)


def test_distribution_must_sum_to_one():
    with pytest.raises(ValueError):
        LabelDistribution(probs=np.array([0.5, 0.4]))


def test_recommendation_entropy_single_class():
    recs = [[3, 3, 3], [3, 3], [3]]
    assert recommendation_entropy(recs, 14) == 0.0


def test_recommendation_entropy_uniform_pool():
    recs = [[c] for c in range(1, 15)]
    assert recommendation_entropy(recs, 14) == pytest.approx(math.log(14), abs=1e-12)


def test_recommendation_entropy_equals_normalized_counts():
    rng = np.random.default_rng(5)
    recs = [list(rng.integers(1, 15, size=10)) for _ in range(20)]
    got = recommendation_entropy(recs, 14)
    counts = np.zeros(14)
    for row in recs:
        for label in row:
            counts[label - 1] += 1
    expected = shannon_entropy(LabelDistribution(probs=counts / counts.sum()))
    assert got == pytest.approx(expected, abs=1e-15)


def test_pooled_label_out_of_range():
    with pytest.raises(ValueError, match="outside"):
        pooled_distribution([[15]], 14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_entropy_never_exceeds_ln_n(seed):
    rng = np.random.default_rng(seed)
    recs = [list(rng.integers(1, 15, size=int(rng.integers(1, 8))))
            for _ in range(int(rng.integers(1, 10)))]
    assert recommendation_entropy(recs, 14) <= math.log(14) + 1e-9


def test_accuracy_monotone_in_k():
    rng = np.random.default_rng(8)
    for _ in range(50):
        recs = [list(rng.integers(0, 5, size=10)) for _ in range(6)]
        targets = list(rng.integers(0, 5, size=6))
        values = [accuracy_at_k(recs, targets, k) for k in range(1, 11)]
        assert all(a <= b for a, b in zip(values, values[1:]))


def test_random_baseline_deterministic():
    a = random_baseline(14, 5, 1000, seed=7)
    b = random_baseline(14, 5, 1000, seed=7)
    assert a == b


def test_random_baseline_closed_form_small():
    acc, _, _ = random_baseline(14, 10, 20000, seed=1)
    expected = 1 - (13 / 14) ** 10
    assert acc == pytest.approx(expected, abs=0.02)


def test_random_baseline_nonuniform_prior():
    prior = np.array([0.9] + [0.1 / 13] * 13)
    acc, _, ent = random_baseline(14, 5, 20000, seed=2, label_prior=prior)
    # concentrated prior: most queries hit the dominant label
    assert acc > 1 - (13 / 14) ** 5
    assert ent < math.log(14)


def test_category_color_accuracy_exact_match():
    props = [[("skirt", 3)]]
    gt = [("skirt", 3)]
    cat, col, joint, skipped = category_color_accuracy(props, gt, 1)
    assert (cat, col, joint, skipped) == (1.0, 1.0, 1.0, 0)


def test_category_hit_color_miss():
    props = [[("skirt", 9)]]
    gt = [("skirt", 3)]
    cat, col, joint, _ = category_color_accuracy(props, gt, 1)
    assert (cat, col, joint) == (1.0, 0.0, 0.0)


def test_category_color_matches_predicate_oracle():
    rng = np.random.default_rng(11)
    cats = ["a", "b", "c"]
    props, gt = [], []
    for _ in range(50):
        props.append([(cats[int(rng.integers(3))], int(rng.integers(4)))
                      for _ in range(6)])
        gt.append((cats[int(rng.integers(3))], int(rng.integers(4))))
    for k in (1, 3, 6):
        cat, col, joint, _ = category_color_accuracy(props, gt, k)
        exp_cat = np.mean([any(p[0] == g[0] for p in ps[:k])
                           for ps, g in zip(props, gt)])
        exp_col = np.mean([any(p[1] == g[1] for p in ps[:k])
                           for ps, g in zip(props, gt)])
        exp_joint = np.mean([any(p == g for p in ps[:k])
                             for ps, g in zip(props, gt)])
        assert (cat, col, joint) == (exp_cat, exp_col, exp_joint)
        assert joint <= min(cat, col)


def test_missing_annotation_skipped():
    props = [[("skirt", 3)], [("pants", 1)]]
    gt = [("skirt", 3), (None, 1)]
    cat, col, joint, skipped = category_color_accuracy(props, gt, 1)
    assert skipped == 1
    assert cat == 1.0
