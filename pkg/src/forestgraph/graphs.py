"""Thresholded graphs from similarity matrices, plus feature-space baselines."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .proximity import ProximityMatrix
from .tabular import FeatureMatrix, SplitIndices


@dataclass
class Adjacency:
    """Undirected unweighted graph from thresholding a symmetric similarity.

    ``edges`` lists each unordered pair once as (i, j) with i < j, sorted;
    ``indptr``/``indices`` give CSR-style per-node neighbor lists (both
    directions, ascending).
    """

    n_nodes: int
    edges: np.ndarray  # E x 2, i < j
    alpha: float
    source_kind: str
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def to_sparse(self) -> sparse.csr_matrix:
        """0/1 symmetric adjacency matrix."""
        return sparse.csr_matrix(
            (np.ones(len(self.indices)), self.indices, self.indptr),
            shape=(self.n_nodes, self.n_nodes))


def _build_neighbor_lists(n: int, pairs: np.ndarray):
    if pairs.size == 0:
        return np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    both = sparse.csr_matrix(
        (np.ones(2 * len(pairs)),
         (np.concatenate([pairs[:, 0], pairs[:, 1]]),
          np.concatenate([pairs[:, 1], pairs[:, 0]]))),
        shape=(n, n))
    both.sort_indices()
    return both.indptr.astype(np.int64), both.indices.astype(np.int64)


def threshold_adjacency(P: ProximityMatrix | np.ndarray, alpha: float,
                        kind: str | None = None) -> Adjacency:
    """Keep pairs whose similarity is at least alpha (diagonal zeroed first).

    The input must be exactly symmetric. Accepts a ProximityMatrix or a plain
    square array (pass ``kind`` for the tag in the latter case).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if isinstance(P, ProximityMatrix):
        values, tag = P.values, P.kind
    else:
        values, tag = P, kind or "custom"
    n = values.shape[0]
    if values.shape != (n, n):
        raise ValueError("similarity matrix must be square")

    if sparse.issparse(values):
        if (values != values.T).nnz != 0:
            raise ValueError("similarity matrix must be symmetric")
        if alpha <= 0:
            raise ValueError(
                "alpha = 0 selects every pair; sparse storage cannot hold the "
                "complete graph, re-run with a dense matrix")
        coo = values.tocoo()
        keep = (coo.data >= alpha) & (coo.row < coo.col)
        pairs = np.column_stack([coo.row[keep], coo.col[keep]]).astype(np.int64)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        pairs = pairs[order]
    else:
        if not np.array_equal(values, values.T):
            raise ValueError("similarity matrix must be symmetric")
        mask = values >= alpha
        np.fill_diagonal(mask, False)
        mask = np.triu(mask)
        rows, cols = np.nonzero(mask)
        pairs = np.column_stack([rows, cols]).astype(np.int64)

    indptr, indices = _build_neighbor_lists(n, pairs)
    return Adjacency(n_nodes=n, edges=pairs, alpha=float(alpha),
                     source_kind=tag, indptr=indptr, indices=indices)


def _as_array(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.asarray(X, dtype=np.float64)


def cosine_matrix(X) -> np.ndarray:
    """All-pairs cosine similarity; all-zero rows get similarity 0 to everything."""
    X = _as_array(X)
    norms = np.sqrt(np.square(X).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    sim = (X @ X.T) / np.outer(safe, safe)
    zero = norms == 0
    sim[zero, :] = 0.0
    sim[:, zero] = 0.0
    return sim


def jaccard_matrix(X) -> np.ndarray:
    """All-pairs generalized Jaccard: sum of element minima over sum of maxima.

    Requires nonnegative features; a 0/0 ratio (two all-zero rows) is 1.
    """
    X = _as_array(X)
    if X.size and X.min() < 0:
        raise ValueError("jaccard similarity requires nonnegative features")
    n = X.shape[0]
    sim = np.empty((n, n))
    chunk = max(1, 2_000_000 // max(1, n * X.shape[1]))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        mins = np.minimum(X[start:stop, None, :], X[None, :, :]).sum(axis=2)
        maxs = np.maximum(X[start:stop, None, :], X[None, :, :]).sum(axis=2)
        sim[start:stop] = np.where(maxs > 0, mins / np.where(maxs > 0, maxs, 1.0), 1.0)
    return sim


def rbf_matrix(X, gamma: float = 0.01) -> np.ndarray:
    """Gaussian kernel exp(-gamma * squared distance), min-max rescaled to [0, 1]
    over the off-diagonal entries (left unscaled when those are constant)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    X = _as_array(X)
    sq = np.square(X).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (X @ X.T), 0.0)
    raw = np.exp(-gamma * d2)
    n = raw.shape[0]
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        lo, hi = raw[off].min(), raw[off].max()
        if hi > lo:
            raw = (raw - lo) / (hi - lo)
    return np.clip(raw, 0.0, 1.0)


def shift_to_unit_range(X) -> np.ndarray:
    """Per-column min-max rescale to [0, 1]; constant columns map to zeros."""
    X = _as_array(X)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return (X - lo) / span


@dataclass
class GraphData:
    """Transductive node-classification problem: one graph over all rows.

    ``labels`` carries -1 at every node whose label is hidden from training;
    true test labels live outside this structure on purpose.
    """

    adjacency: Adjacency
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    test_mask: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = self.adjacency.n_nodes
        if self.features.shape[0] != n:
            raise ValueError("feature rows must match node count")
        if self.train_mask.shape != (n,) or self.test_mask.shape != (n,):
            raise ValueError("masks must have one entry per node")
        if (self.train_mask & self.test_mask).any() or \
                not (self.train_mask | self.test_mask).all():
            raise ValueError("masks must partition the nodes")
        if (self.labels[~self.train_mask] != -1).any():
            raise ValueError("labels outside the train mask must be hidden (-1)")

    def restrict_training(self, keep_nodes: np.ndarray) -> "GraphData":
        """Copy with the train mask narrowed to ``keep_nodes`` and other labels hidden."""
        keep = np.zeros(self.adjacency.n_nodes, dtype=bool)
        keep[keep_nodes] = True
        if not (self.train_mask[keep_nodes]).all():
            raise ValueError("keep_nodes must be existing training nodes")
        labels = np.where(keep, self.labels, -1)
        return GraphData(self.adjacency, self.features, labels,
                         keep, ~keep, self.n_classes)


def assemble_graph(adjacency: Adjacency, features, labels,
                   split: SplitIndices, n_classes: int) -> GraphData:
    """Package graph, features, split masks and train-only labels."""
    features = _as_array(features)
    labels = np.asarray(labels, dtype=np.int64)
    n = adjacency.n_nodes
    if features.shape[0] != n or labels.shape[0] != n:
        raise ValueError("features and labels must cover every node")
    train_mask = np.zeros(n, dtype=bool)
    train_mask[split.train] = True
    test_mask = np.zeros(n, dtype=bool)
    test_mask[split.test] = True
    visible = np.where(train_mask, labels, -1)
    return GraphData(adjacency, features, visible, train_mask, test_mask, n_classes)


def write_edge_list(adj: Adjacency, path: str | Path) -> None:
    """Text export, one "i j" pair (i < j) per line after a comment header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={adj.n_nodes} alpha={adj.alpha!r} kind={adj.source_kind}\n")
        for i, j in adj.edges:
            fh.write(f"{i} {j}\n")


def read_edge_list(path: str | Path) -> Adjacency:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(part.split("=", 1) for part in header.lstrip("# ").split())
        pairs = [tuple(map(int, line.split())) for line in fh if line.strip()]
    n = int(fields["nodes"])
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    indptr, indices = _build_neighbor_lists(n, edges)
    return Adjacency(n_nodes=n, edges=edges, alpha=float(fields["alpha"]),
                     source_kind=fields["kind"], indptr=indptr, indices=indices)


def mean_neighbor_operator(adj: Adjacency) -> sparse.csr_matrix:
    """Row-normalized adjacency: averaging over neighbors, zero row if none."""
    deg = adj.degrees().astype(np.float64)
    inv = np.where(deg > 0, 1.0 / np.where(deg > 0, deg, 1.0), 0.0)
    data = np.repeat(inv, np.diff(adj.indptr))
    return sparse.csr_matrix((data, adj.indices, adj.indptr),
                             shape=(adj.n_nodes, adj.n_nodes))
