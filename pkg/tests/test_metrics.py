"""Metric arithmetic against brute-force oracles.

AUC-ROC is checked against exhaustive pair counting, threshold selection
against a full sweep over every candidate, both on hundreds of random
cases small enough for the oracle to be trivially correct.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizdann.exceptions import DataError, SingleClassError
from seizdann.metrics import (
    ConfusionCounts,
    auc_pr,
    auc_roc,
    confusion_counts,
    confusion_metrics,
    detect,
    pr_curve_points,
    roc_curve_points,
    select_threshold,
)


def _rng_cases(n_cases, max_n=20, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        n = int(rng.integers(2, max_n + 1))
        # coarse grid raises tie frequency, the interesting regime
        probs = rng.integers(1, 10, size=n) / 10.0
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        yield probs, labels


def _pair_count_auc(probs, labels):
    pos = probs[labels == 1]
    neg = probs[labels == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def _f1_at(probs, labels, tau):
    pred = (probs >= tau).astype(int)
    tp = int(((pred == 1) & (labels == 1)).sum())
    fp = int(((pred == 1) & (labels == 0)).sum())
    fn = int(((pred == 0) & (labels == 1)).sum())
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2 * tp / denom


# --- detect ---------------------------------------------------------------

def test_detect_basic_and_inclusive():
    probs = np.array([0.7, 0.5, 0.49])
    np.testing.assert_array_equal(detect(probs, 0.5), [1, 1, 0])


def test_detect_rejects_degenerate_tau():
    with pytest.raises(DataError):
        detect(np.array([0.5]), 0.0)
    with pytest.raises(DataError):
        detect(np.array([0.5]), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0.01, 0.98))
def test_detect_monotone_in_tau(probs, tau):
    probs = np.asarray(probs)
    lo = detect(probs, tau)
    hi = detect(probs, min(tau + 0.01, 0.99))
    assert np.all(hi <= lo)


# --- select_threshold -----------------------------------------------------

def test_threshold_spec_examples():
    assert select_threshold(np.array([0.1, 0.2, 0.8, 0.9]),
                            np.array([0, 0, 1, 1])) == pytest.approx(0.8)
    assert select_threshold(np.array([0.4, 0.4, 0.4]),
                            np.array([0, 1, 1])) == pytest.approx(0.4)
    assert select_threshold(np.array([0.9, 0.8, 0.7]),
                            np.array([1, 0, 1])) == pytest.approx(0.7)


def test_threshold_requires_a_positive():
    with pytest.raises(SingleClassError):
        select_threshold(np.array([0.2, 0.3]), np.array([0, 0]))


def test_threshold_sweep_oracle_200_cases():
    for probs, labels in _rng_cases(200, seed=1):
        if labels.sum() == 0:
            labels[-1] = 1
        tau = select_threshold(probs, labels)
        candidates = np.unique(probs)
        best = max(_f1_at(probs, labels, c) for c in candidates)
        assert _f1_at(probs, labels, tau) == pytest.approx(best, abs=1e-12)
        # ties broken toward the smallest threshold
        winners = [c for c in candidates
                   if _f1_at(probs, labels, c) == pytest.approx(best, abs=1e-12)]
        assert tau == pytest.approx(min(winners))


# --- confusion metrics ----------------------------------------------------

def test_confusion_counts_partition():
    pred = np.array([1, 0, 1, 0, 1])
    labels = np.array([1, 1, 0, 0, 1])
    c = confusion_counts(pred, labels)
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 1, 1)
    assert c.tp + c.tn + c.fp + c.fn == len(pred)


def test_perfect_prediction_metrics():
    m = confusion_metrics(ConfusionCounts(tp=3, tn=4, fp=0, fn=0))
    assert m["sensitivity"] == 1.0
    assert m["specificity"] == 1.0
    assert m["mcc"] == 1.0


def test_mcc_hand_value():
    m = confusion_metrics(ConfusionCounts(tp=2, tn=3, fp=1, fn=1))
    assert m["mcc"] == pytest.approx(5.0 / 12.0, abs=1e-12)


def test_all_negative_rule_degenerates_to_zero():
    m = confusion_metrics(ConfusionCounts(tp=0, tn=5, fp=0, fn=2))
    assert m["sensitivity"] == 0.0
    assert m["mcc"] == 0.0


def test_mcc_symmetric_under_joint_flip():
    for probs, labels in _rng_cases(50, seed=3):
        pred = (probs >= 0.5).astype(int)
        a = confusion_metrics(confusion_counts(pred, labels))["mcc"]
        b = confusion_metrics(confusion_counts(1 - pred, 1 - labels))["mcc"]
        assert a == pytest.approx(b, abs=1e-12)


def test_counts_reject_negative():
    with pytest.raises(DataError):
        ConfusionCounts(tp=-1, tn=0, fp=0, fn=0)


# --- auc_roc ---------------------------------------------------------------

def test_auc_roc_spec_examples():
    assert auc_roc(np.array([0.9, 0.8, 0.2]), np.array([1, 1, 0])) == 1.0
    assert auc_roc(np.array([0.5, 0.5, 0.5]), np.array([1, 0, 1])) == 0.5
    assert auc_roc(np.array([0.9, 0.4, 0.6]), np.array([1, 1, 0])) == 0.5


def test_auc_roc_single_class_rejected():
    with pytest.raises(SingleClassError):
        auc_roc(np.array([0.1, 0.9]), np.array([1, 1]))


def test_auc_roc_pair_counting_oracle_200_cases():
    for probs, labels in _rng_cases(200, seed=5):
        assert auc_roc(probs, labels) == pytest.approx(
            _pair_count_auc(probs, labels), abs=1e-12)


def test_roc_curve_starts_at_origin_ends_at_corner():
    probs = np.array([0.9, 0.6, 0.6, 0.1])
    labels = np.array([1, 1, 0, 0])
    pts = roc_curve_points(probs, labels)
    assert pts[0][:2] == (0.0, 0.0)
    assert pts[-1][:2] == (1.0, 1.0)
    fprs = [p[0] for p in pts]
    tprs = [p[1] for p in pts]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)


# --- auc_pr ----------------------------------------------------------------

def test_auc_pr_spec_examples():
    assert auc_pr(np.array([0.9, 0.8, 0.2]), np.array([1, 1, 0])) == 1.0
    assert auc_pr(np.array([0.9, 0.8, 0.7, 0.1]),
                  np.array([0, 0, 0, 1])) == pytest.approx(0.25)
    assert auc_pr(np.array([0.9, 0.8, 0.7]),
                  np.array([1, 0, 1])) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)


def test_auc_pr_requires_positive():
    with pytest.raises(SingleClassError):
        auc_pr(np.array([0.2, 0.4]), np.array([0, 0]))


def test_auc_pr_average_precision_oracle():
    for probs, labels in _rng_cases(100, seed=7):
        if labels.sum() == 0:
            labels[0] = 1
        # AP over descending tie groups
        order = np.argsort(-probs, kind="stable")
        p, l = probs[order], labels[order]
        total = tp = seen = 0
        i = 0
        while i < len(p):
            j = i
            while j < len(p) and p[j] == p[i]:
                j += 1
            group_pos = int(l[i:j].sum())
            tp += group_pos
            seen = j
            if group_pos:
                total += group_pos * (tp / seen)
            i = j
        expected = total / labels.sum()
        assert auc_pr(probs, labels) == pytest.approx(expected, abs=1e-12)


def test_pr_curve_starts_at_full_precision():
    probs = np.array([0.9, 0.5, 0.5, 0.2])
    labels = np.array([1, 0, 1, 0])
    pts = pr_curve_points(probs, labels)
    assert pts[0][:2] == (0.0, 1.0)
    recalls = [p[0] for p in pts]
    assert recalls == sorted(recalls)
    assert recalls[-1] == 1.0
