import numpy as np
import pytest
from sklearn.metrics import f1_score

from forestgraph.metrics import aggregate_seeds, stratified_kfold, weighted_f1


def test_perfect_predictions():
    y = np.array([0, 1, 2, 1, 0])
    assert weighted_f1(y, y, 3) == 1.0


def test_flipped_balanced_binary_is_zero():
    y = np.array([0, 0, 1, 1])
    assert weighted_f1(y, 1 - y, 2) == 0.0


def test_hand_computed_case():
    # class 0: p=r=1/2, f1=1/2; class 1: p=r=2/3, f1=2/3
    # weighted: (2*0.5 + 3*(2/3)) / 5 = 0.6
    y_true = [0, 0, 1, 1, 1]
    y_pred = [0, 1, 1, 1, 0]
    assert weighted_f1(y_true, y_pred, 2) == pytest.approx(0.6, abs=1e-12)


def test_length_mismatch():
    with pytest.raises(ValueError):
        weighted_f1([0, 1], [0], 2)


def test_degenerate_class_conventions():
    # every prediction lands on an unsupported class: the true class scores
    # 0 (never predicted) and the predicted class carries zero weight
    assert weighted_f1([0, 0], [1, 1], 2) == 0.0
    # a class absent from both truth and prediction contributes nothing
    assert weighted_f1([0, 1, 0, 1], [0, 1, 0, 1], 3) == 1.0


def test_matches_sklearn_on_random_cases():
    rng = np.random.default_rng(0)
    for _ in range(25):
        c = rng.integers(2, 5)
        n = rng.integers(5, 40)
        y_true = rng.integers(0, c, n)
        if len(np.unique(y_true)) < 2:
            continue
        y_pred = rng.integers(0, c, n)
        ours = weighted_f1(y_true, y_pred, int(c))
        theirs = f1_score(y_true, y_pred, labels=np.arange(c),
                          average="weighted", zero_division=0)
        assert ours == pytest.approx(theirs, abs=1e-12)


def test_aggregate_single_score():
    assert aggregate_seeds([0.7]) == (0.7, 0.0)


def test_aggregate_hand_case():
    mean, std = aggregate_seeds([0.8, 0.9])
    assert mean == pytest.approx(0.85, abs=1e-15)
    assert std == pytest.approx(0.05, abs=1e-15)  # population std


def test_aggregate_order_invariant():
    a = aggregate_seeds([0.1, 0.5, 0.9])
    b = aggregate_seeds([0.9, 0.1, 0.5])
    assert a == b


def test_stratified_kfold_partitions():
    labels = np.array([0] * 10 + [1] * 7 + [2] * 5)
    folds = stratified_kfold(labels, 4, seed=1)
    merged = np.sort(np.concatenate(folds))
    assert np.array_equal(merged, np.arange(len(labels)))
    for fold in folds:
        counts = np.bincount(labels[fold], minlength=3)
        # round-robin dealing: per-class fold sizes differ by at most one
        assert counts[0] in (2, 3) and counts[1] in (1, 2) and counts[2] in (1, 2)
    again = stratified_kfold(labels, 4, seed=1)
    assert all(np.array_equal(a, b) for a, b in zip(folds, again))
