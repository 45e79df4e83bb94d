"""Classification metrics and seed aggregation."""

from __future__ import annotations

import numpy as np


def weighted_f1(y_true, y_pred, n_classes: int) -> float:
    """Support-weighted mean of per-class F1 scores.

    Precision or recall with an empty denominator counts as 0, so a class
    that is never predicted contributes an F1 of 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have equal length")
    n = len(y_true)
    total = 0.0
    for k in range(n_classes):
        tp = int(np.sum((y_true == k) & (y_pred == k)))
        fp = int(np.sum((y_true != k) & (y_pred == k)))
        fn = int(np.sum((y_true == k) & (y_pred != k)))
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        total += support / n * f1
    return total


def aggregate_seeds(scores) -> tuple[float, float]:
    """Mean and population standard deviation of per-seed scores."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("need at least one score")
    return float(scores.mean()), float(scores.std())


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Partition positions 0..len(labels)-1 into k class-stratified folds.

    Within each class, shuffled members are dealt round-robin, so fold sizes
    differ by at most one per class. Deterministic for a given seed.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        for i, idx in enumerate(members):
            folds[i % k].append(int(idx))
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]
