"""Window-level detection metrics and F1-maximizing threshold selection.

All functions are pure and operate on 1-D numpy arrays. Ranking metrics
process scores in descending order, grouping exact ties so the results
match their combinatorial definitions (pair counting for ROC, stepwise
average precision for PR) rather than depending on sort stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, SingleClassError

__all__ = [
    "detect",
    "select_threshold",
    "ConfusionCounts",
    "confusion_counts",
    "confusion_metrics",
    "auc_roc",
    "auc_pr",
    "roc_curve_points",
    "pr_curve_points",
]


def _validate_scores(probs, labels) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 1 or labels.shape != probs.shape:
        raise DataError(
            f"scores and labels must be matching 1-D arrays, got {probs.shape} "
            f"and {labels.shape}"
        )
    if probs.size == 0:
        raise DataError("empty score array")
    if not np.isfinite(probs).all():
        raise DataError("scores contain non-finite values")
    bad = set(np.unique(labels)) - {0, 1}
    if bad:
        raise DataError(f"labels must be 0/1, found {sorted(bad)}")
    return probs, labels.astype(np.int64)


def detect(probs: np.ndarray, tau: float) -> np.ndarray:
    """Inclusive thresholding: probability >= tau becomes label 1."""
    if not 0.0 < tau < 1.0:
        raise DataError(f"threshold must lie in (0,1), got {tau}")
    probs = np.asarray(probs, dtype=np.float64)
    return (probs >= tau).astype(np.int64)


def _tie_groups(probs: np.ndarray, labels: np.ndarray):
    """Yield (score, n_pos, n_neg) per unique score, descending."""
    order = np.argsort(-probs, kind="stable")
    p_sorted = probs[order]
    y_sorted = labels[order]
    splits = np.flatnonzero(np.diff(p_sorted)) + 1
    for chunk_p, chunk_y in zip(
        np.split(p_sorted, splits), np.split(y_sorted, splits)
    ):
        pos = int(chunk_y.sum())
        yield float(chunk_p[0]), pos, chunk_y.size - pos


def select_threshold(probs: np.ndarray, labels: np.ndarray) -> float:
    """The unique predicted probability maximizing F1 under the >= rule.

    Candidates are visited in descending score order; replacing on ties
    (>=) therefore leaves the smallest maximizing threshold selected.
    """
    probs, labels = _validate_scores(probs, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise SingleClassError("threshold selection needs at least one positive label")
    best_tau = None
    best_f1 = -1.0
    tp = fp = 0
    for score, pos, neg in _tie_groups(probs, labels):
        tp += pos
        fp += neg
        denom = 2 * tp + fp + (n_pos - tp)
        f1 = 2.0 * tp / denom if denom > 0 else 0.0
        if f1 >= best_f1:
            best_f1 = f1
            best_tau = score
    return float(best_tau)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name, v in (("tp", self.tp), ("tn", self.tn), ("fp", self.fp), ("fn", self.fn)):
            if v < 0 or v != int(v):
                raise DataError(f"confusion count {name} must be a nonnegative integer, got {v}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion_counts(predictions: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape:
        raise DataError("predictions and labels must have identical shape")
    return ConfusionCounts(
        tp=int(((predictions == 1) & (labels == 1)).sum()),
        tn=int(((predictions == 0) & (labels == 0)).sum()),
        fp=int(((predictions == 1) & (labels == 0)).sum()),
        fn=int(((predictions == 0) & (labels == 1)).sum()),
    )


def confusion_metrics(counts: ConfusionCounts) -> dict[str, float]:
    """Sensitivity, specificity, and MCC; zero denominators yield 0."""
    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    sens = tp / (tp + fn) if tp + fn > 0 else 0.0
    spec = tn / (tn + fp) if tn + fp > 0 else 0.0
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        mcc = 0.0
    else:
        # Integer numerator keeps exact small-count cases exact.
        mcc = (tp * tn - fp * fn) / float(np.sqrt(denom_sq))
    return {"sensitivity": float(sens), "specificity": float(spec), "mcc": float(mcc)}


def auc_roc(probs: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outranks a random negative, ties 0.5.

    Computed as the trapezoidal area over the tie-grouped ROC steps with an
    integer numerator, so it equals the pair-counting definition exactly:
    each tie group contributes delta_fp * (2*tp_before + pos_in_group).
    """
    probs, labels = _validate_scores(probs, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC-ROC needs both classes present")
    numerator = 0
    tp = 0
    for _, pos, neg in _tie_groups(probs, labels):
        numerator += neg * (2 * tp + pos)
        tp += pos
    return numerator / (2.0 * n_pos * n_neg)


def auc_pr(probs: np.ndarray, labels: np.ndarray) -> float:
    """Average precision: sum of precision at each newly reached positive."""
    probs, labels = _validate_scores(probs, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise SingleClassError("AUC-PR needs at least one positive label")
    total = 0.0
    tp = fp = 0
    for _, pos, neg in _tie_groups(probs, labels):
        tp += pos
        fp += neg
        if pos > 0:
            total += pos * (tp / (tp + fp))
    return total / n_pos


def roc_curve_points(probs: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) rows from (0,0) through (1,1), descending tau."""
    probs, labels = _validate_scores(probs, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC curve needs both classes present")
    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    for score, pos, neg in _tie_groups(probs, labels):
        tp += pos
        fp += neg
        points.append((fp / n_neg, tp / n_pos, score))
    return points


def pr_curve_points(probs: np.ndarray, labels: np.ndarray) -> list[tuple[float, float, float]]:
    """(recall, precision, threshold) rows, descending tau."""
    probs, labels = _validate_scores(probs, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise SingleClassError("PR curve needs at least one positive label")
    points = [(0.0, 1.0, float("inf"))]
    tp = fp = 0
    for score, pos, neg in _tie_groups(probs, labels):
        tp += pos
        fp += neg
        points.append((tp / n_pos, tp / (tp + fp), score))
    return points
