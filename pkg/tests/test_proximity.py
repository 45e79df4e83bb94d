import numpy as np
import pytest

from forestgraph.forest import DecisionTree, ForestParams, RandomForest, fit_forest
from forestgraph.proximity import (extend_test_test, full_proximity,
                                   oob_proximity, original_proximity,
                                   read_matrix, read_sparse_triples,
                                   rfgap_proximity, symmetrize, write_matrix,
                                   write_sparse_triples)
from forestgraph.synthetic import make_blobs
from forestgraph.tabular import encode


# ---------------------------------------------------------------- oracles

def oracle_original(leaves):
    n, n_trees = leaves.shape
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            P[i, j] = sum(int(leaves[i, t] == leaves[j, t])
                          for t in range(n_trees)) / n_trees
    return P


def oob_rows(forest, n, train_rows):
    oob = np.ones((n, forest.n_trees), dtype=bool)
    for pos, row in enumerate(train_rows):
        oob[row] = forest.inbag_counts[:, pos] == 0
    return oob


def oracle_oob(forest, leaves, train_rows):
    n = leaves.shape[0]
    oob = oob_rows(forest, n, train_rows)
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            num = den = 0
            for t in range(forest.n_trees):
                if oob[i, t] and oob[j, t]:
                    den += 1
                    if leaves[i, t] == leaves[j, t]:
                        num += 1
            P[i, j] = num / den if den else 0.0
    return P


def oracle_rfgap(forest, leaves, train_rows):
    n = leaves.shape[0]
    train_rows = list(train_rows)
    oob = oob_rows(forest, n, train_rows)
    P = np.zeros((n, n))
    for i in range(n):
        trees_i = [t for t in range(forest.n_trees) if oob[i, t]]
        if not trees_i:
            continue
        for t in trees_i:
            coleaf = [pos for pos, row in enumerate(train_rows)
                      if forest.inbag_counts[t, pos] > 0
                      and leaves[row, t] == leaves[i, t]]
            mass = sum(forest.inbag_counts[t, pos] for pos in coleaf)
            for pos in coleaf:
                P[i, train_rows[pos]] += forest.inbag_counts[t, pos] / mass
        P[i] /= len(trees_i)
    return P


# ---------------------------------------------------------------- fixtures

def fake_tree(n_leaves, c=2):
    return DecisionTree(feature=np.array([-1]), threshold=np.array([0.0]),
                        left=np.array([-1]), right=np.array([-1]),
                        leaf_id=np.array([0]),
                        leaf_counts=np.zeros((n_leaves, c)))


def fake_forest(inbag, n_leaves_per_tree, c=2):
    inbag = np.asarray(inbag, dtype=np.int64)
    trees = [fake_tree(nl, c) for nl in n_leaves_per_tree]
    return RandomForest(trees, inbag, c, ForestParams(n_trees=len(trees)),
                        np.ones(c, dtype=np.int64))


def small_fitted(seed, n=10, n_trees=4, classes=2):
    ds = make_blobs(n + 4, classes, separation=1.0, seed=seed)
    X = encode(ds, np.arange(n + 4)).values
    train = np.arange(n)
    test = np.arange(n, n + 4)
    forest = fit_forest(X[train], ds.labels[train],
                        ForestParams(n_trees=n_trees, seed=seed), classes)
    leaves = forest.apply(X)
    return forest, leaves, train, test


# ----------------------------------------------------------- original

def test_original_two_of_three_trees():
    leaves = np.array([[0, 1, 2],
                       [0, 1, 3]])  # same leaf in trees 0 and 1 only
    P = original_proximity(leaves)
    assert P.values[0, 1] == pytest.approx(2 / 3)
    assert P.symmetric


def test_original_diagonal_is_one():
    rng = np.random.default_rng(0)
    leaves = rng.integers(0, 3, size=(6, 5))
    P = original_proximity(leaves)
    assert np.array_equal(np.diag(P.values), np.ones(6))


def test_original_matches_bruteforce():
    rng = np.random.default_rng(1)
    leaves = rng.integers(0, 4, size=(5, 4))
    P = original_proximity(leaves)
    assert np.array_equal(P.values, oracle_original(leaves))


# ----------------------------------------------------------- oob

def test_oob_diag_one_when_sometimes_oob():
    forest, leaves, train, _ = small_fitted(seed=3)
    P = oob_proximity(forest, leaves, train)
    oob_any = (forest.inbag_counts == 0).any(axis=0)
    for pos, row in enumerate(train):
        if oob_any[pos]:
            assert P.values[row, row] == 1.0


def test_oob_hand_case():
    # three trees; the pair is both-OOB in trees 0 and 2, same leaf only in 2
    inbag = np.array([[0, 0], [1, 0], [0, 0]])
    forest = fake_forest(inbag, n_leaves_per_tree=[2, 1, 1])
    leaves = np.array([[0, 0, 0],
                       [1, 0, 0]])
    P = oob_proximity(forest, leaves, np.array([0, 1]))
    assert P.values[0, 1] == pytest.approx(0.5)
    assert P.values[1, 0] == pytest.approx(0.5)


def test_oob_never_joint_out_of_bag_is_zero():
    inbag = np.array([[1, 1]])
    forest = fake_forest(inbag, n_leaves_per_tree=[1])
    leaves = np.zeros((2, 1), dtype=np.int64)
    P = oob_proximity(forest, leaves, np.array([0, 1]))
    assert P.values[0, 1] == 0.0


def test_oob_symmetric_exactly():
    forest, leaves, train, _ = small_fitted(seed=4, n_trees=6)
    P = oob_proximity(forest, leaves, train)
    assert np.array_equal(P.values, P.values.T)


# ----------------------------------------------------------- rfgap

def test_rfgap_hand_case_single_tree():
    # multiplicities (2,1,1,0), one shared leaf: row 3 gets (0.5, 0.25, 0.25, 0)
    inbag = np.array([[2, 1, 1, 0]])
    forest = fake_forest(inbag, n_leaves_per_tree=[1])
    leaves = np.zeros((4, 1), dtype=np.int64)
    P = rfgap_proximity(forest, leaves, np.arange(4))
    assert P.values[3].tolist() == [0.5, 0.25, 0.25, 0.0]
    # rows 0..2 are in-bag in the only tree, so they are all-zero
    assert np.all(P.values[:3] == 0.0)


def test_rfgap_train_diagonal_zero():
    forest, leaves, train, _ = small_fitted(seed=5)
    P = rfgap_proximity(forest, leaves, train)
    assert np.all(np.diag(P.values)[train] == 0.0)


def test_rfgap_rows_sum_to_one():
    forest, leaves, train, test = small_fitted(seed=6, n=12, n_trees=5)
    P = rfgap_proximity(forest, leaves, train)
    oob_any = (forest.inbag_counts == 0).any(axis=0)
    sums = P.values[:, train].sum(axis=1)
    for pos, row in enumerate(train):
        expected = 1.0 if oob_any[pos] else 0.0
        assert sums[row] == pytest.approx(expected, abs=1e-9)
    for row in test:
        assert sums[row] == pytest.approx(1.0, abs=1e-9)


def test_rfgap_test_columns_zero():
    forest, leaves, train, test = small_fitted(seed=7)
    P = rfgap_proximity(forest, leaves, train)
    assert np.all(P.values[:, test] == 0.0)


def test_rfgap_vote_replication():
    ds = make_blobs(80, 3, separation=1.5, seed=8)
    X = encode(ds, np.arange(80)).values
    forest = fit_forest(X, ds.labels, ForestParams(n_trees=30, seed=8), 3)
    leaves = forest.apply(X)
    P = rfgap_proximity(forest, leaves, np.arange(80)).values
    oob_labels, oob_shares = forest.oob_predict(X)
    onehot = np.eye(3)[ds.labels]
    votes = P @ onehot
    covered = (forest.inbag_counts == 0).any(axis=0)
    assert covered.any()
    for i in np.flatnonzero(covered):
        assert votes[i] == pytest.approx(oob_shares[i], abs=1e-9)
        # tie membership at the share tolerance; the sets must match exactly
        ours = set(np.flatnonzero(votes[i] >= votes[i].max() - 1e-9))
        theirs = set(np.flatnonzero(oob_shares[i] >= oob_shares[i].max() - 1e-9))
        assert ours == theirs
        if len(ours) == 1:
            assert votes[i].argmax() == oob_labels[i]


# ------------------------------------------------- randomized oracle sweep

def test_all_measures_match_bruteforce_on_random_forests():
    for seed in range(12):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 12))
        n_test = int(rng.integers(0, 3))
        forest, leaves, train, test = small_fitted(
            seed=seed, n=n, n_trees=int(rng.integers(1, 5)))
        P_or = original_proximity(leaves)
        assert np.array_equal(P_or.values, oracle_original(leaves))
        P_oob = oob_proximity(forest, leaves, train)
        assert np.array_equal(P_oob.values, oracle_oob(forest, leaves, train))
        P_gap = rfgap_proximity(forest, leaves, train)
        assert np.allclose(P_gap.values, oracle_rfgap(forest, leaves, train),
                           atol=1e-12)


def test_all_measures_in_unit_interval():
    forest, leaves, train, _ = small_fitted(seed=9, n=12, n_trees=6)
    for P in (original_proximity(leaves),
              oob_proximity(forest, leaves, train),
              rfgap_proximity(forest, leaves, train)):
        assert P.values.min() >= 0.0
        assert P.values.max() <= 1.0


def test_prefix_of_larger_forest_reproduces_smaller_proximity():
    ds = make_blobs(30, 2, seed=10)
    X = encode(ds, np.arange(30)).values
    small = fit_forest(X, ds.labels, ForestParams(n_trees=3, seed=11), 2)
    large = fit_forest(X, ds.labels, ForestParams(n_trees=5, seed=11), 2)
    leaves_small = small.apply(X)
    leaves_large = large.apply(X)
    assert np.array_equal(leaves_small, leaves_large[:, :3])
    P3 = original_proximity(leaves_small).values
    P5 = original_proximity(leaves_large).values
    extra = original_proximity(leaves_large[:, 3:]).values
    assert np.allclose(5 * P5, 3 * P3 + 2 * extra, atol=1e-12)


# ----------------------------------------------------------- extension

def test_extend_all_zero():
    out = extend_test_test(np.zeros((2, 3)), np.zeros((3, 2)))
    assert np.all(out == 0.0)


def test_extend_selector_rows():
    P_tt = np.array([[1.0, 0.0], [0.0, 1.0]])
    P_tr = np.array([[0.3, 0.7], [0.6, 0.2]])
    out = extend_test_test(P_tt, P_tr)
    assert np.array_equal(out, P_tr)  # row a picks P_tr[match(a), :]


def test_extend_uniform_half():
    P_tt = np.full((2, 2), 0.5)
    out = extend_test_test(P_tt, P_tt.T)
    assert np.all(out == 0.5)


def test_extend_rescales_above_one():
    P_tt = np.full((1, 3), 1.0)
    out = extend_test_test(P_tt, P_tt.T)  # raw product = 3.0
    assert out[0, 0] == 1.0


def test_extend_shape_mismatch():
    with pytest.raises(ValueError):
        extend_test_test(np.zeros((2, 3)), np.zeros((2, 3)))


# ----------------------------------------------------------- symmetrize

def test_symmetrize_idempotent_on_symmetric():
    P = original_proximity(np.random.default_rng(2).integers(0, 2, (5, 3)))
    S = symmetrize(P)
    assert np.array_equal(S.values, P.values)


def test_symmetrize_averages():
    forest = fake_forest(np.array([[2, 1, 1, 0]]), [1])
    leaves = np.zeros((4, 1), dtype=np.int64)
    P = rfgap_proximity(forest, leaves, np.arange(4))
    P.values[0, 1], P.values[1, 0] = 0.2, 0.6
    S = symmetrize(P)
    assert S.values[0, 1] == pytest.approx(0.4)
    assert S.values[1, 0] == pytest.approx(0.4)
    assert np.abs(S.values - S.values.T).max() == 0.0
    assert S.symmetric


# ----------------------------------------------------------- full assembly

def test_full_proximity_rfgap_blocks():
    forest, leaves, train, test = small_fitted(seed=12, n=10, n_trees=5)
    raw = rfgap_proximity(forest, leaves, train)
    final = full_proximity(forest, leaves, train, test, "rfgap")
    assert final.symmetric
    assert np.array_equal(final.values, final.values.T)
    # cross blocks keep the raw test->train proximities
    cross = raw.values[np.ix_(test, train)]
    assert np.allclose(final.values[np.ix_(test, train)], cross, atol=1e-15)
    # the test-test block is the diffusion product
    expected_tt = extend_test_test(cross, cross.T)
    assert np.allclose(final.values[np.ix_(test, test)], expected_tt, atol=1e-15)


def test_full_proximity_original_and_oob_untouched():
    forest, leaves, train, test = small_fitted(seed=13)
    direct = original_proximity(leaves)
    via = full_proximity(forest, leaves, train, test, "original")
    assert np.array_equal(direct.values, via.values)
    direct_oob = oob_proximity(forest, leaves, train)
    via_oob = full_proximity(forest, leaves, train, test, "oob")
    assert np.array_equal(direct_oob.values, via_oob.values)


def test_full_proximity_unknown_kind():
    forest, leaves, train, test = small_fitted(seed=14)
    with pytest.raises(ValueError):
        full_proximity(forest, leaves, train, test, "cosine")


# ----------------------------------------------------------- sparse path

def test_sparse_accumulation_matches_dense():
    for seed in (20, 21, 22):
        forest, leaves, train, test = small_fitted(seed=seed, n=9, n_trees=4)
        for kind in ("original", "oob", "rfgap"):
            dense = full_proximity(forest, leaves, train, test, kind)
            sp = full_proximity(forest, leaves, train, test, kind,
                                dense_limit=0)
            assert sp.is_sparse
            assert np.allclose(sp.toarray(), dense.values, atol=1e-12)


# ----------------------------------------------------------- export

def test_matrix_export_round_trip(tmp_path):
    forest, leaves, train, _ = small_fitted(seed=15)
    P = original_proximity(leaves)
    path = tmp_path / "prox.txt"
    write_matrix(P, path)
    header = path.read_text().splitlines()[0]
    assert header == f"{P.n} original"
    again = read_matrix(path)
    assert np.array_equal(again.values, P.values)
    assert again.kind == "original"


def test_sparse_triples_round_trip(tmp_path):
    forest, leaves, train, test = small_fitted(seed=16)
    P = full_proximity(forest, leaves, train, test, "rfgap")
    path = tmp_path / "prox.triples"
    write_sparse_triples(P, path)
    again = read_sparse_triples(path)
    assert np.array_equal(again.toarray(), P.toarray())
    assert again.kind == "rfgap"
    assert again.symmetric
