"""Forest-derived pairwise proximities.

Three measures are provided. ``original`` counts how often two rows share a
leaf, over all trees. ``oob`` counts shared leaves only over trees where both
rows are out-of-bag, normalized by how often that happens. ``rfgap`` weights
co-occupancy by bootstrap multiplicity and leaf in-bag mass, which makes each
row's proximities over the training columns a probability vector whose
weighted class vote reproduces the forest's out-of-bag prediction.

Matrices are dense arrays up to ``DENSE_ROW_LIMIT`` rows and scipy CSR above
that (entries below 1e-12 dropped).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import sparse

from .forest import RandomForest

KINDS = ("original", "oob", "rfgap")
DENSE_ROW_LIMIT = 20_000
SPARSE_DROP_TOL = 1e-12


@dataclass
class ProximityMatrix:
    """N x N similarity matrix tagged with its measure kind.

    ``row_index[i]`` is the dataset row shown at matrix row/column i.
    ``values`` is a dense ndarray or a scipy CSR matrix; every entry lies in
    [0, 1].
    """

    values: np.ndarray | sparse.csr_matrix
    kind: str
    row_index: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown proximity kind {self.kind!r}")
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValueError("proximity matrix must be square")
        data = self.values.data if self.is_sparse else self.values
        if data.size and (data.min() < -1e-12 or data.max() > 1.0 + 1e-12):
            raise ValueError("proximity entries must lie in [0, 1]")

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def toarray(self) -> np.ndarray:
        return self.values.toarray() if self.is_sparse else self.values


def _leaf_groups(leaf_column: np.ndarray, rows: np.ndarray):
    """Yield arrays of rows sharing a leaf, for one tree's leaf assignment."""
    if rows.size == 0:
        return
    vals = leaf_column[rows]
    order = np.argsort(vals, kind="stable")
    sorted_vals = vals[order]
    cuts = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    for g in np.split(rows[order], cuts):
        yield g


def original_proximity(leaves: np.ndarray,
                       dense_limit: int = DENSE_ROW_LIMIT) -> ProximityMatrix:
    """Fraction of trees in which two rows land in the same leaf."""
    leaves = np.asarray(leaves)
    n, n_trees = leaves.shape
    if n_trees < 1:
        raise ValueError("need at least one tree")
    all_rows = np.arange(n)
    if n <= dense_limit:
        acc = np.zeros((n, n))
        for t in range(n_trees):
            for g in _leaf_groups(leaves[:, t], all_rows):
                acc[np.ix_(g, g)] += 1.0
        values = acc / n_trees
    else:
        values = _accumulate_sparse_blocks(
            n, ((g, g, None) for t in range(n_trees)
                for g in _leaf_groups(leaves[:, t], all_rows)),
            scale=1.0 / n_trees)
    return ProximityMatrix(values, "original", all_rows, symmetric=True)


def _oob_indicator(forest: RandomForest, n: int, train_rows: np.ndarray) -> np.ndarray:
    """n x T boolean matrix; test rows count as out-of-bag in every tree."""
    out = np.ones((n, forest.n_trees), dtype=bool)
    out[train_rows] = forest.oob_mask().T
    return out


def oob_proximity(forest: RandomForest, leaves: np.ndarray, train_rows: np.ndarray,
                  dense_limit: int = DENSE_ROW_LIMIT) -> ProximityMatrix:
    """Shared-leaf fraction restricted to trees where both rows are out-of-bag.

    The ratio is 0 for pairs never simultaneously out-of-bag.
    """
    leaves = np.asarray(leaves)
    train_rows = np.asarray(train_rows, dtype=np.int64)
    n = leaves.shape[0]
    oob = _oob_indicator(forest, n, train_rows)
    if n <= dense_limit:
        num = np.zeros((n, n))
        for t in range(forest.n_trees):
            for g in _leaf_groups(leaves[:, t], np.flatnonzero(oob[:, t])):
                num[np.ix_(g, g)] += 1.0
        den = oob.astype(np.float64) @ oob.T.astype(np.float64)
        with np.errstate(invalid="ignore"):
            values = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    else:
        num = _accumulate_sparse_blocks(
            n, ((g, g, None) for t in range(forest.n_trees)
                for g in _leaf_groups(leaves[:, t], np.flatnonzero(oob[:, t]))))
        num = num.tocoo()
        oob_f = oob.astype(np.float64)
        den = np.einsum("ij,ij->i", oob_f[num.row], oob_f[num.col])
        values = sparse.csr_matrix(
            (num.data / den, (num.row, num.col)), shape=(n, n))
    return ProximityMatrix(values, "oob", np.arange(n), symmetric=True)


def rfgap_proximity(forest: RandomForest, leaves: np.ndarray, train_rows: np.ndarray,
                    dense_limit: int = DENSE_ROW_LIMIT) -> ProximityMatrix:
    """Bootstrap-weighted co-leaf proximity (raw, asymmetric).

    For row i and tree t in which i is out-of-bag, every in-bag training row j
    sharing i's leaf contributes its multiplicity divided by the leaf's total
    in-bag mass; contributions are averaged over those trees. Training rows
    that are in-bag everywhere get an all-zero row; test rows average over all
    trees. Columns at test rows are zero because test rows carry no bootstrap
    multiplicity.
    """
    leaves = np.asarray(leaves)
    train_rows = np.asarray(train_rows, dtype=np.int64)
    n = leaves.shape[0]
    n_train = len(train_rows)
    is_train = np.zeros(n, dtype=bool)
    is_train[train_rows] = True
    test_rows = np.flatnonzero(~is_train)
    oob = forest.oob_mask()

    dense = n <= dense_limit
    acc = np.zeros((n, n_train)) if dense else None
    coo_rows, coo_cols, coo_data = [], [], []
    s_count = np.zeros(n)

    for t, tree in enumerate(forest.trees):
        mult = forest.inbag_counts[t].astype(np.float64)
        leaf_of_train = leaves[train_rows, t]
        leaf_mass = np.bincount(leaf_of_train, weights=mult, minlength=tree.n_leaves)
        col_weight = mult / leaf_mass[leaf_of_train]  # 0 for out-of-bag columns
        eligible = np.concatenate([train_rows[oob[t]], test_rows])
        s_count[eligible] += 1.0
        if dense:
            scatter = np.zeros((tree.n_leaves, n_train))
            scatter[leaf_of_train, np.arange(n_train)] = col_weight
            acc[eligible] += scatter[leaves[eligible, t]]
        else:
            inbag_pos = np.flatnonzero(mult > 0)
            by_leaf: dict[int, np.ndarray] = {}
            for g in _leaf_groups(leaf_of_train, inbag_pos):
                by_leaf[int(leaf_of_train[g[0]])] = g
            for g in _leaf_groups(leaves[:, t], eligible):
                cols = by_leaf.get(int(leaves[g[0], t]))
                if cols is None:
                    continue
                coo_rows.append(np.repeat(g, len(cols)))
                coo_cols.append(np.tile(cols, len(g)))
                coo_data.append(np.tile(col_weight[cols], len(g)))

    inv = np.where(s_count > 0, 1.0 / np.where(s_count > 0, s_count, 1.0), 0.0)
    if dense:
        acc *= inv[:, None]
        values = np.zeros((n, n))
        values[:, train_rows] = acc
    else:
        mat = sparse.csr_matrix(
            (np.concatenate(coo_data) if coo_data else np.empty(0),
             (np.concatenate(coo_rows) if coo_rows else np.empty(0, dtype=np.int64),
              np.concatenate(coo_cols) if coo_cols else np.empty(0, dtype=np.int64))),
            shape=(n, n_train))
        mat = sparse.diags(inv) @ mat
        remap = sparse.csr_matrix(
            (np.ones(n_train), (np.arange(n_train), train_rows)), shape=(n_train, n))
        values = _drop_tiny(mat @ remap)
    return ProximityMatrix(values, "rfgap", np.arange(n), symmetric=False)


def _accumulate_sparse_blocks(n, blocks, scale: float = 1.0) -> sparse.csr_matrix:
    """Sum outer-product-of-ones blocks given as (rows, cols, _) into a CSR matrix."""
    acc = sparse.csr_matrix((n, n))
    pending_r, pending_c = [], []
    pending_size = 0
    def flush(acc):
        nonlocal pending_r, pending_c, pending_size
        if not pending_r:
            return acc
        r = np.concatenate(pending_r)
        c = np.concatenate(pending_c)
        acc = acc + sparse.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
        pending_r, pending_c, pending_size = [], [], 0
        return acc
    for rows, cols, _ in blocks:
        pending_r.append(np.repeat(rows, len(cols)))
        pending_c.append(np.tile(cols, len(rows)))
        pending_size += len(rows) * len(cols)
        if pending_size >= 5_000_000:
            acc = flush(acc)
    acc = flush(acc)
    if scale != 1.0:
        acc = acc * scale
    return _drop_tiny(acc)


def _drop_tiny(mat: sparse.csr_matrix) -> sparse.csr_matrix:
    mat = mat.tocsr()
    mat.data[np.abs(mat.data) < SPARSE_DROP_TOL] = 0.0
    mat.eliminate_zeros()
    return mat


def extend_test_test(P_test_train, P_train_test):
    """Infer test-test similarity through shared training neighbors.

    The product block is rescaled by its maximum entry when that maximum
    exceeds 1, keeping entries threshold-comparable in [0, 1].
    """
    if P_test_train.shape[1] != P_train_test.shape[0]:
        raise ValueError("block shapes do not conform")
    block = P_test_train @ P_train_test
    if sparse.issparse(block):
        peak = block.data.max() if block.nnz else 0.0
        if peak > 1.0:
            block = block * (1.0 / peak)
        block = block.tocsr()
        np.clip(block.data, 0.0, 1.0, out=block.data)
    else:
        peak = block.max() if block.size else 0.0
        if peak > 1.0:
            block = block / peak
        block = np.clip(block, 0.0, 1.0)
    return block


def symmetrize(P: ProximityMatrix) -> ProximityMatrix:
    """Average a matrix with its transpose."""
    if P.is_sparse:
        values = _drop_tiny((P.values + P.values.T) * 0.5)
    else:
        values = (P.values + P.values.T) / 2.0
    return replace(P, values=values, symmetric=True)


def full_proximity(forest: RandomForest, leaves: np.ndarray, train_rows: np.ndarray,
                   test_rows: np.ndarray, kind: str,
                   dense_limit: int = DENSE_ROW_LIMIT) -> ProximityMatrix:
    """Symmetric all-pairs proximity of the requested kind, ready to threshold.

    ``original`` and ``oob`` cover all pairs directly (test rows counting as
    out-of-bag everywhere for ``oob``). For ``rfgap`` the train-test blocks
    are completed with the transpose of the test-train block and the
    test-test block with the diffusion product, then the result is
    symmetrized.
    """
    if kind == "original":
        return original_proximity(leaves, dense_limit)
    if kind == "oob":
        return oob_proximity(forest, leaves, train_rows, dense_limit)
    if kind != "rfgap":
        raise ValueError(f"unknown proximity kind {kind!r}")

    raw = rfgap_proximity(forest, leaves, train_rows, dense_limit)
    train_rows = np.asarray(train_rows, dtype=np.int64)
    test_rows = np.asarray(test_rows, dtype=np.int64)
    if test_rows.size == 0:
        return symmetrize(raw)
    if raw.is_sparse:
        cross = raw.values[test_rows][:, train_rows]
        tt = extend_test_test(cross, cross.T.tocsr())
        n = raw.n
        values = raw.values \
            + _place_block(cross.T, train_rows, test_rows, n) \
            + _place_block(tt, test_rows, test_rows, n)
        raw = replace(raw, values=_drop_tiny(values))
    else:
        V = raw.values
        cross = V[np.ix_(test_rows, train_rows)]
        V[np.ix_(train_rows, test_rows)] = cross.T
        V[np.ix_(test_rows, test_rows)] = extend_test_test(cross, cross.T)
    return symmetrize(raw)


def _place_block(block, row_ids, col_ids, n) -> sparse.csr_matrix:
    b = sparse.coo_matrix(block)
    return sparse.csr_matrix(
        (b.data, (row_ids[b.row], col_ids[b.col])), shape=(n, n))


def write_matrix(P: ProximityMatrix, path: str | Path) -> None:
    """Dense text export: header line "N kind", then space-separated rows."""
    values = P.toarray()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{P.n} {P.kind}\n")
        for row in values:
            fh.write(" ".join(repr(float(v)) for v in row))
            fh.write("\n")


def read_matrix(path: str | Path) -> ProximityMatrix:
    with open(path, encoding="utf-8") as fh:
        n_text, kind = fh.readline().split()
        n = int(n_text)
        values = np.loadtxt(fh, ndmin=2)
    if values.shape != (n, n):
        raise ValueError("matrix file does not match its header")
    return ProximityMatrix(values, kind, np.arange(n),
                           symmetric=bool(np.array_equal(values, values.T)))


def write_sparse_triples(P: ProximityMatrix, path: str | Path) -> None:
    """Sparse text export: header line "N kind", then "i j value" per nonzero."""
    coo = sparse.coo_matrix(P.values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{P.n} {P.kind}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if v != 0.0:
                fh.write(f"{i} {j} {float(v)!r}\n")


def read_sparse_triples(path: str | Path,
                        dense_limit: int = DENSE_ROW_LIMIT) -> ProximityMatrix:
    with open(path, encoding="utf-8") as fh:
        n_text, kind = fh.readline().split()
        n = int(n_text)
        rows, cols, vals = [], [], []
        for line in fh:
            i, j, v = line.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    values = mat.toarray() if n <= dense_limit else mat
    if sparse.issparse(values):
        symmetric = (values != values.T).nnz == 0
    else:
        symmetric = bool(np.array_equal(values, values.T))
    return ProximityMatrix(values, kind, np.arange(n), symmetric=symmetric)
