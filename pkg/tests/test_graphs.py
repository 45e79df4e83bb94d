import numpy as np
import pytest
from scipy import sparse

from forestgraph.graphs import (assemble_graph, cosine_matrix,
                                jaccard_matrix, mean_neighbor_operator,
                                rbf_matrix, read_edge_list,
                                shift_to_unit_range, threshold_adjacency,
                                write_edge_list)
from forestgraph.proximity import (ProximityMatrix, read_sparse_triples,
                                   write_sparse_triples)
from forestgraph.tabular import SplitIndices


def sym(values, kind="original"):
    values = np.asarray(values, dtype=np.float64)
    return ProximityMatrix(values, kind, np.arange(len(values)), symmetric=True)


def test_alpha_zero_complete_graph():
    P = sym(np.full((4, 4), 0.0) + np.eye(4))
    adj = threshold_adjacency(P, 0.0)
    assert adj.edge_count == 6  # all off-diagonal pairs once


def test_alpha_above_one_empty():
    P = sym(np.ones((3, 3)))
    adj = threshold_adjacency(P, 1.01)
    assert adj.edge_count == 0


def test_threshold_keeps_inclusive_pairs():
    values = np.eye(4)
    values[0, 1] = values[1, 0] = 0.3
    values[0, 2] = values[2, 0] = 0.6
    values[1, 3] = values[3, 1] = 0.6
    adj = threshold_adjacency(sym(values), 0.5)
    assert adj.edges.tolist() == [[0, 2], [1, 3]]


def test_threshold_exact_boundary_inclusive():
    values = np.eye(2)
    values[0, 1] = values[1, 0] = 0.5
    adj = threshold_adjacency(sym(values), 0.5)
    assert adj.edge_count == 1


def test_diagonal_zeroed_before_threshold():
    P = sym(np.eye(3))
    adj = threshold_adjacency(P, 0.5)
    assert adj.edge_count == 0  # the unit diagonal never creates self-loops


def test_asymmetric_rejected():
    values = np.eye(2)
    values[0, 1] = 0.4
    with pytest.raises(ValueError, match="symmetric"):
        threshold_adjacency(ProximityMatrix(values, "original", np.arange(2)), 0.1)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        threshold_adjacency(sym(np.eye(2)), -0.1)


def test_edges_monotone_in_alpha():
    rng = np.random.default_rng(0)
    raw = rng.random((12, 12))
    values = (raw + raw.T) / 2
    np.fill_diagonal(values, 1.0)
    P = sym(values)
    alphas = np.linspace(0.0, 1.0, 51)
    edge_sets = []
    for alpha in alphas:
        adj = threshold_adjacency(P, float(alpha))
        edge_sets.append({tuple(e) for e in adj.edges})
    for small, large in zip(edge_sets[1:], edge_sets[:-1]):
        assert small <= large
    assert len(edge_sets[0]) == 12 * 11 // 2


def test_neighbor_lists_symmetric():
    values = np.eye(4)
    values[0, 2] = values[2, 0] = 0.9
    adj = threshold_adjacency(sym(values), 0.5)
    assert adj.neighbors(0).tolist() == [2]
    assert adj.neighbors(2).tolist() == [0]
    assert adj.neighbors(1).tolist() == []
    assert adj.degrees().tolist() == [1, 0, 1, 0]


def test_threshold_sparse_matches_dense():
    rng = np.random.default_rng(1)
    raw = rng.random((10, 10))
    raw[raw < 0.5] = 0.0
    values = (raw + raw.T) / 2
    dense = threshold_adjacency(sym(values), 0.4)
    sp = ProximityMatrix(sparse.csr_matrix(values), "original",
                         np.arange(10), symmetric=True)
    adj = threshold_adjacency(sp, 0.4)
    assert np.array_equal(adj.edges, dense.edges)


def test_threshold_sparse_rejects_alpha_zero():
    sp = ProximityMatrix(sparse.csr_matrix(np.eye(3)), "original",
                         np.arange(3), symmetric=True)
    with pytest.raises(ValueError, match="complete graph"):
        threshold_adjacency(sp, 0.0)


def test_cosine_self_similarity_one():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    sim = cosine_matrix(X)
    assert np.allclose(np.diag(sim), 1.0)


def test_cosine_orthogonal_and_hand_value():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    sim = cosine_matrix(X)
    assert sim[0, 1] == pytest.approx(0.0)
    assert sim[0, 2] == pytest.approx(1 / np.sqrt(2), abs=1e-12)


def test_cosine_zero_rows():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    sim = cosine_matrix(X)
    assert np.all(sim[0] == 0.0)
    assert np.all(sim[:, 0] == 0.0)


def test_jaccard_identical_rows():
    X = np.array([[0.5, 1.0], [0.5, 1.0]])
    assert jaccard_matrix(X)[0, 1] == 1.0


def test_jaccard_disjoint_support():
    X = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert jaccard_matrix(X)[0, 1] == 0.0


def test_jaccard_hand_value():
    X = np.array([[2.0, 1.0], [1.0, 1.0]])
    assert jaccard_matrix(X)[0, 1] == pytest.approx(2 / 3, abs=1e-12)


def test_jaccard_zero_rows_define_one():
    X = np.zeros((2, 3))
    assert np.all(jaccard_matrix(X) == 1.0)


def test_jaccard_rejects_negative():
    with pytest.raises(ValueError):
        jaccard_matrix(np.array([[-1.0, 0.0]]))


def test_rbf_distance_ten():
    X = np.array([[0.0], [10.0], [3.0]])
    sq = np.square(X[:, 0][:, None] - X[:, 0][None, :])
    raw = np.exp(-0.01 * sq)
    assert raw[0, 1] == pytest.approx(np.exp(-1.0), abs=1e-12)
    sim = rbf_matrix(X, 0.01)
    off = ~np.eye(3, dtype=bool)
    assert sim[off].min() == 0.0
    assert sim[off].max() == 1.0


def test_rbf_in_unit_interval():
    rng = np.random.default_rng(2)
    sim = rbf_matrix(rng.normal(size=(20, 4)), 0.01)
    assert sim.min() >= 0.0
    assert sim.max() <= 1.0


def test_rbf_rejects_bad_gamma():
    with pytest.raises(ValueError):
        rbf_matrix(np.zeros((2, 2)), 0.0)


def test_shift_to_unit_range():
    X = np.array([[-2.0, 5.0], [0.0, 5.0], [2.0, 5.0]])
    out = shift_to_unit_range(X)
    assert out[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert np.all(out[:, 1] == 0.0)  # constant column


def make_graph(n=6, edge_pairs=(), train=None):
    values = np.eye(n)
    for i, j in edge_pairs:
        values[i, j] = values[j, i] = 1.0
    adj = threshold_adjacency(sym(values), 0.5)
    train = np.arange(n - 2) if train is None else np.asarray(train)
    test = np.setdiff1d(np.arange(n), train)
    split = SplitIndices(train=train, test=test, seed=0)
    features = np.arange(n * 2, dtype=np.float64).reshape(n, 2)
    labels = np.arange(n) % 2
    return assemble_graph(adj, features, labels, split, 2), split, labels


def test_assemble_graph_masks_partition():
    graph, split, labels = make_graph(edge_pairs=[(0, 1)])
    assert (graph.train_mask ^ graph.test_mask).all()
    assert graph.train_mask.sum() == len(split.train)
    assert np.array_equal(graph.labels[split.train], labels[split.train])
    assert np.all(graph.labels[split.test] == -1)


def test_assemble_graph_isolated_nodes():
    graph, _, _ = make_graph(edge_pairs=[])
    assert graph.adjacency.edge_count == 0
    assert graph.features[3].tolist() == [6.0, 7.0]


def test_assemble_graph_shape_mismatch():
    graph, split, labels = make_graph()
    with pytest.raises(ValueError):
        assemble_graph(graph.adjacency, graph.features[:-1], labels, split, 2)


def test_restrict_training_hides_labels():
    graph, split, labels = make_graph(edge_pairs=[(0, 1), (2, 3)])
    keep = split.train[:2]
    sub = graph.restrict_training(keep)
    assert np.array_equal(np.flatnonzero(sub.train_mask), np.sort(keep))
    assert np.all(sub.labels[~sub.train_mask] == -1)
    with pytest.raises(ValueError):
        graph.restrict_training(split.test[:1])


def test_edge_list_round_trip(tmp_path):
    values = np.eye(5)
    values[0, 3] = values[3, 0] = 0.8
    values[1, 4] = values[4, 1] = 0.9
    adj = threshold_adjacency(sym(values, kind="rfgap"), 0.7)
    path = tmp_path / "graph.edges"
    write_edge_list(adj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# nodes=5 alpha=0.7 kind=rfgap"
    assert lines[1:] == ["0 3", "1 4"]
    again = read_edge_list(path)
    assert again.n_nodes == 5
    assert again.alpha == 0.7
    assert again.source_kind == "rfgap"
    assert np.array_equal(again.edges, adj.edges)


def test_threshold_from_exported_triples_identical(tmp_path):
    rng = np.random.default_rng(3)
    raw = rng.random((8, 8))
    raw[raw < 0.4] = 0.0
    P = sym((raw + raw.T) / 2)
    path = tmp_path / "p.triples"
    write_sparse_triples(P, path)
    again = read_sparse_triples(path)
    for alpha in (0.2, 0.5, 0.9):
        a = threshold_adjacency(P, alpha)
        b = threshold_adjacency(again, alpha)
        assert np.array_equal(a.edges, b.edges)


def test_to_sparse_matches_edges():
    values = np.eye(4)
    values[0, 1] = values[1, 0] = 0.9
    values[2, 3] = values[3, 2] = 0.7
    adj = threshold_adjacency(sym(values), 0.5)
    dense = adj.to_sparse().toarray()
    assert np.array_equal(dense, dense.T)
    assert dense.sum() == 2 * adj.edge_count
    for i, j in adj.edges:
        assert dense[i, j] == 1.0 and dense[j, i] == 1.0
    assert np.all(np.diag(dense) == 0.0)


def test_mean_neighbor_operator_rows():
    values = np.eye(4)
    values[0, 1] = values[1, 0] = 1.0
    values[0, 2] = values[2, 0] = 1.0
    adj = threshold_adjacency(sym(values), 0.5)
    M = mean_neighbor_operator(adj).toarray()
    assert M[0].tolist() == [0.0, 0.5, 0.5, 0.0]
    assert M[1].tolist() == [1.0, 0.0, 0.0, 0.0]
    assert np.all(M[3] == 0.0)  # isolated node keeps a zero row
