"""CART decision trees and bootstrap random forests with in-bag/out-of-bag bookkeeping.

Trees are fit on bootstrap multiplicities used as integer sample weights, so a
row drawn twice counts twice everywhere: split scoring, leaf counts and the
minimum-size stopping rules. The forest keeps the exact multiplicity matrix
(``inbag_counts``), which downstream proximity measures depend on.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .metrics import stratified_kfold, weighted_f1

SERIAL_FORMAT = "forestgraph-forest"
SERIAL_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str = "sqrt"  # "sqrt" or "all"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_features not in ("sqrt", "all"):
            raise ValueError("max_features must be 'sqrt' or 'all'")


@dataclass
class DecisionTree:
    """Array-of-nodes CART tree.

    ``feature[i] == -1`` marks node i as a leaf; ``leaf_id`` is then a dense
    index into ``leaf_counts`` (per-class bootstrap-weighted counts). Routing
    sends a sample left iff its feature value is <= the node threshold.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray
    leaf_counts: np.ndarray  # n_leaves x n_classes

    @property
    def n_leaves(self) -> int:
        return self.leaf_counts.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by every row of X."""
        out = np.empty(X.shape[0], dtype=np.int64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.feature[node] < 0:
                out[rows] = self.leaf_id[node]
                continue
            goes_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((self.right[node], rows[~goes_left]))
            stack.append((self.left[node], rows[goes_left]))
        return out


def _best_split(X, y, w, rows, feats, n_classes, min_leaf):
    """Lowest-cost Gini split over candidate features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Ties go to the lowest feature index, then the lowest threshold
    (feats must be sorted ascending; positions scan in value order).
    Returns (cost, feature, threshold) or None if no admissible split exists.
    """
    Xs = X[np.ix_(rows, feats)]
    n, k = Xs.shape
    order = np.argsort(Xs, axis=0, kind="stable")
    sv = np.take_along_axis(Xs, order, axis=0)
    ys = y[rows][order]
    ws = w[rows][order]

    onehot = np.zeros((n, k, n_classes), dtype=np.float64)
    np.put_along_axis(onehot, ys[:, :, None], ws[:, :, None], axis=2)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]  # k x c
    left_w = cum.sum(axis=2)
    total_w = left_w[-1]

    lw = left_w[:-1]
    rw = total_w[None, :] - lw
    valid = (sv[:-1] < sv[1:]) & (lw >= min_leaf) & (rw >= min_leaf)
    if not valid.any():
        return None

    with np.errstate(divide="ignore", invalid="ignore"):
        gini_l = 1.0 - np.square(cum[:-1] / lw[:, :, None]).sum(axis=2)
        gini_r = 1.0 - np.square((total[None] - cum[:-1]) / rw[:, :, None]).sum(axis=2)
        cost = (lw * gini_l + rw * gini_r) / total_w[None, :]
    cost[~valid] = np.inf

    pos = cost.argmin(axis=0)
    per_feat = cost[pos, np.arange(k)]
    j = int(per_feat.argmin())
    if not np.isfinite(per_feat[j]):
        return None
    p = int(pos[j])
    thr = (sv[p, j] + sv[p + 1, j]) / 2.0
    return float(per_feat[j]), int(feats[j]), float(thr)


def fit_tree(X: np.ndarray, y: np.ndarray, sample_weights: np.ndarray,
             params: ForestParams, rng: np.random.Generator,
             n_classes: int | None = None) -> DecisionTree:
    """Grow a CART tree on the rows with positive weight.

    A node becomes a leaf when its weighted size is below min_samples_split,
    it is pure, or no split reduces Gini impurity while leaving both children
    with at least min_samples_leaf weighted samples.
    """
    y = np.asarray(y, dtype=np.int64)
    w = np.asarray(sample_weights, dtype=np.float64)
    if w.sum() <= 0:
        raise ValueError("sum of sample weights must be positive")
    c = n_classes if n_classes is not None else int(y.max()) + 1
    d = X.shape[1]
    k = max(1, int(np.sqrt(d))) if params.max_features == "sqrt" else d

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_id: list[int] = []
    leaf_counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_id.append(-1)
        return len(feature) - 1

    root_rows = np.flatnonzero(w > 0)
    stack = [(new_node(), root_rows)]
    while stack:
        node, rows = stack.pop()
        counts = np.bincount(y[rows], weights=w[rows], minlength=c)
        weight = counts.sum()
        pure = np.count_nonzero(counts) <= 1
        split = None
        if not pure and weight >= params.min_samples_split:
            feats = np.sort(rng.choice(d, size=min(k, d), replace=False))
            split = _best_split(X, y, w, rows, feats, c, params.min_samples_leaf)
            if split is not None:
                parent_gini = 1.0 - np.square(counts / weight).sum()
                if parent_gini - split[0] <= 0.0:
                    split = None
        if split is None:
            leaf_id[node] = len(leaf_counts)
            leaf_counts.append(counts)
            continue
        _, f, thr = split
        feature[node] = f
        threshold[node] = thr
        goes_left = X[rows, f] <= thr
        left_child = new_node()
        right_child = new_node()
        left[node] = left_child
        right[node] = right_child
        stack.append((right_child, rows[~goes_left]))
        stack.append((left_child, rows[goes_left]))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_id=np.array(leaf_id, dtype=np.int64),
        leaf_counts=np.array(leaf_counts, dtype=np.float64),
    )


class RandomForest:
    """Bootstrap forest plus the exact multiplicity of every draw.

    ``inbag_counts[t, j]`` is how many times training row j entered tree t's
    bootstrap sample; row j is out-of-bag for tree t iff that count is 0.
    """

    def __init__(self, trees: list[DecisionTree], inbag_counts: np.ndarray,
                 n_classes: int, params: ForestParams,
                 train_class_counts: np.ndarray, n_features: int | None = None):
        self.trees = trees
        self.inbag_counts = np.asarray(inbag_counts, dtype=np.int64)
        self.n_classes = n_classes
        self.params = params
        self.train_class_counts = np.asarray(train_class_counts, dtype=np.int64)
        self.n_features = n_features
        if self.inbag_counts.shape[0] != len(trees):
            raise ValueError("inbag_counts rows must match tree count")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_train(self) -> int:
        return self.inbag_counts.shape[1]

    def oob_mask(self) -> np.ndarray:
        """Boolean T x n_train matrix, True where a row is out-of-bag."""
        return self.inbag_counts == 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf-index matrix: entry (i, t) is the leaf of row i in tree t."""
        X = np.asarray(X, dtype=np.float64)
        d = self.n_features if self.n_features is not None else \
            int(max((t.feature.max(initial=-1) for t in self.trees), default=-1)) + 1
        if X.ndim != 2 or X.shape[1] < d or \
                (self.n_features is not None and X.shape[1] != d):
            raise ValueError("feature count does not match the fitted trees")
        return np.column_stack([t.apply(X) for t in self.trees])

    def _leaf_distributions(self, tree: DecisionTree) -> np.ndarray:
        sums = tree.leaf_counts.sum(axis=1, keepdims=True)
        return tree.leaf_counts / np.where(sums > 0, sums, 1.0)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Average of per-tree normalized leaf class distributions."""
        leaves = self.apply(X)
        votes = np.zeros((X.shape[0], self.n_classes))
        for t, tree in enumerate(self.trees):
            votes += self._leaf_distributions(tree)[leaves[:, t]]
        return votes / self.n_trees

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def oob_predict(self, X_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Out-of-bag prediction for the training rows.

        Each tree for which a row is out-of-bag contributes its reached
        leaf's normalized in-bag class distribution; contributions are
        averaged. Rows that are in-bag everywhere fall back to the global
        training class frequencies.
        """
        if X_train.shape[0] != self.n_train:
            raise ValueError("oob_predict expects the training rows")
        leaves = self.apply(X_train)
        oob = self.oob_mask()
        votes = np.zeros((self.n_train, self.n_classes))
        n_oob = np.zeros(self.n_train)
        for t, tree in enumerate(self.trees):
            rows = np.flatnonzero(oob[t])
            votes[rows] += self._leaf_distributions(tree)[leaves[rows, t]]
            n_oob[rows] += 1.0
        shares = np.empty_like(votes)
        covered = n_oob > 0
        shares[covered] = votes[covered] / n_oob[covered, None]
        shares[~covered] = self.train_class_counts / self.train_class_counts.sum()
        return shares.argmax(axis=1), shares

    def to_json(self) -> str:
        payload = {
            "format": SERIAL_FORMAT,
            "version": SERIAL_VERSION,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "params": {
                "n_trees": self.params.n_trees,
                "min_samples_split": self.params.min_samples_split,
                "min_samples_leaf": self.params.min_samples_leaf,
                "max_features": self.params.max_features,
                "seed": self.params.seed,
            },
            "train_class_counts": self.train_class_counts.tolist(),
            "inbag_counts": self.inbag_counts.tolist(),
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "leaf_id": t.leaf_id.tolist(),
                    "leaf_counts": t.leaf_counts.tolist(),
                }
                for t in self.trees
            ],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "RandomForest":
        payload = json.loads(text)
        if payload.get("format") != SERIAL_FORMAT:
            raise ValueError("not a serialized forest")
        if payload.get("version") != SERIAL_VERSION:
            raise ValueError(f"unsupported forest version {payload.get('version')}")
        trees = [
            DecisionTree(
                feature=np.array(t["feature"], dtype=np.int64),
                threshold=np.array(t["threshold"], dtype=np.float64),
                left=np.array(t["left"], dtype=np.int64),
                right=np.array(t["right"], dtype=np.int64),
                leaf_id=np.array(t["leaf_id"], dtype=np.int64),
                leaf_counts=np.array(t["leaf_counts"], dtype=np.float64),
            )
            for t in payload["trees"]
        ]
        return cls(trees, np.array(payload["inbag_counts"], dtype=np.int64),
                   payload["n_classes"], ForestParams(**payload["params"]),
                   np.array(payload["train_class_counts"], dtype=np.int64),
                   n_features=payload.get("n_features"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RandomForest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_forest(X_train: np.ndarray, y_train: np.ndarray, params: ForestParams,
               n_classes: int | None = None) -> RandomForest:
    """Fit a bootstrap forest; tree t draws from generator seed params.seed + t.

    Each tree gets an independent generator so fitting is deterministic and
    trees could be built in parallel without changing the result.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.int64)
    n = X_train.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training rows")
    c = n_classes if n_classes is not None else int(y_train.max()) + 1
    trees = []
    inbag = np.empty((params.n_trees, n), dtype=np.int64)
    for t in range(params.n_trees):
        rng = np.random.default_rng(params.seed + t)
        draw = rng.integers(0, n, size=n)
        counts = np.bincount(draw, minlength=n)
        inbag[t] = counts
        trees.append(fit_tree(X_train, y_train, counts, params, rng, n_classes=c))
    return RandomForest(trees, inbag, c, params,
                        np.bincount(y_train, minlength=c),
                        n_features=X_train.shape[1])


def default_forest_grid(seed: int = 0) -> list[ForestParams]:
    """The standard tuning grid: every combination of tree count,
    min_samples_split and min_samples_leaf listed below, in that nesting order."""
    grid = []
    for n_trees, mss, msl in itertools.product(
            (50, 100, 200, 500, 700, 1000), (2, 5, 10),
            (1, 20, 50, 80, 100, 150, 200, 300, 500)):
        grid.append(ForestParams(n_trees=n_trees, min_samples_split=mss,
                                 min_samples_leaf=msl, seed=seed))
    return grid


def grid_search(X_train: np.ndarray, y_train: np.ndarray,
                grid: list[ForestParams], k: int,
                fold_seed: int = 0) -> ForestParams:
    """Pick the candidate with the best mean weighted F1 over k stratified folds.

    Folds are shared across candidates. A fold whose training part is missing
    a class is skipped for that candidate; ties keep the earliest grid entry.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if not grid:
        raise ValueError("grid must not be empty")
    y_train = np.asarray(y_train, dtype=np.int64)
    c = int(y_train.max()) + 1
    folds = stratified_kfold(y_train, k, fold_seed)
    all_rows = np.arange(len(y_train))

    best_params, best_score = None, -np.inf
    for params in grid:
        scores = []
        for fold in folds:
            tr = np.setdiff1d(all_rows, fold)
            if len(np.unique(y_train[tr])) < c:
                continue
            forest = fit_forest(X_train[tr], y_train[tr], params, n_classes=c)
            pred = forest.predict(X_train[fold])
            scores.append(weighted_f1(y_train[fold], pred, c))
        if not scores:
            continue
        score = float(np.mean(scores))
        if score > best_score:
            best_score, best_params = score, params
    if best_params is None:
        raise ValueError("no candidate could be scored on any fold")
    return best_params


def with_seed(params: ForestParams, seed: int) -> ForestParams:
    return replace(params, seed=seed)
