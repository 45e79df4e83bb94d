# Walk through the three forest proximity measures on a tiny dataset:
# how often two rows share a leaf (original), the same restricted to trees
# where both rows were out-of-bag (oob), and the bootstrap-weighted variant
# whose rows vote exactly like the forest's out-of-bag prediction (rfgap).

import numpy as np

from forestgraph import ForestParams, fit_forest, encode
from forestgraph.proximity import (original_proximity, oob_proximity,
                                   rfgap_proximity)
from forestgraph.synthetic import make_blobs

np.set_printoptions(precision=3, suppress=True, linewidth=120)

dataset = make_blobs(10, n_classes=2, separation=2.5, seed=0)
X = encode(dataset, np.arange(10)).values
train_rows = np.arange(8)   # rows 8 and 9 act as unseen test rows

forest = fit_forest(X[train_rows], dataset.labels[train_rows],
                    ForestParams(n_trees=25, seed=0), n_classes=2)
leaves = forest.apply(X)
print(f"forest: {forest.n_trees} trees, labels {dataset.labels.tolist()}")
print(f"row 0 landed in leaves {leaves[0].tolist()} across the trees\n")

P_or = original_proximity(leaves)
print("original proximity (share-a-leaf fraction over all trees):")
print(P_or.values)
print("diagonal is always 1:", np.diag(P_or.values).tolist(), "\n")

P_oob = oob_proximity(forest, leaves, train_rows)
print("oob proximity (co-leaf fraction among jointly out-of-bag trees):")
print(P_oob.values)
print("symmetric:", bool(np.array_equal(P_oob.values, P_oob.values.T)), "\n")

P_gap = rfgap_proximity(forest, leaves, train_rows)
print("rfgap proximity (raw, asymmetric; in-bag mass weighted):")
print(P_gap.values)
print("train diagonal is zero:", np.diag(P_gap.values)[train_rows].tolist())
print("row sums over train columns (1 wherever the row was ever out-of-bag):")
print(P_gap.values[:, train_rows].sum(axis=1))

# the rfgap rows vote exactly like the forest's out-of-bag prediction
votes = P_gap.values @ np.eye(2)[dataset.labels]
oob_labels, oob_shares = forest.oob_predict(X[train_rows])
print("\nrfgap-weighted votes vs forest oob vote shares (train rows):")
for i in train_rows:
    if (forest.inbag_counts[:, i] == 0).any():
        print(f"  row {i}: votes {votes[i]}  oob {oob_shares[i]}")
