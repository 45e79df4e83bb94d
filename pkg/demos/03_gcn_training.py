# Train the graph network on a proximity graph and compare against the
# graph-free MLP baseline on the same split.

from forestgraph import (ForestParams, TrainConfig, fit_forest, encode,
                         assemble_graph, threshold_adjacency, train, predict,
                         weighted_f1, mlp_baseline_train_predict)
from forestgraph.proximity import full_proximity
from forestgraph.synthetic import make_blobs
from forestgraph.tabular import stratified_split

dataset = make_blobs(200, n_classes=3, n_features=4, separation=2.2, seed=2)
split = stratified_split(dataset, 0.8, seed=2)
fm = encode(dataset, split.train)
X, y = fm.values, dataset.labels

forest = fit_forest(X[split.train], y[split.train],
                    ForestParams(n_trees=80, seed=2), n_classes=3)
P = full_proximity(forest, forest.apply(X), split.train, split.test, "rfgap")
adjacency = threshold_adjacency(P, 0.05)
print(f"graph: {adjacency.n_nodes} nodes, {adjacency.edge_count} edges "
      f"(mean degree {adjacency.degrees().mean():.1f})")

graph = assemble_graph(adjacency, X, y, split, n_classes=3)
config = TrainConfig(learning_rate=0.02, epochs=150, n_layers=2,
                     hidden_dims=(32, 32), head_hidden=32, seed=2)
model = train(graph, config)

trace = model.loss_trace
print("loss trace: " + "  ".join(
    f"ep{e}={trace[e]:.3f}" for e in (0, 25, 50, 100, len(trace) - 1)))

pred = predict(graph, model)
gcn_f1 = weighted_f1(y[split.test], pred[split.test], 3)
print(f"graph network test weighted F1: {gcn_f1:.3f}")

mlp_pred = mlp_baseline_train_predict(
    fm, y, split, TrainConfig(learning_rate=0.02, epochs=150, n_layers=2,
                              hidden_dims=(64, 128), seed=2))
mlp_f1 = weighted_f1(y[split.test], mlp_pred, 3)
print(f"mlp baseline   test weighted F1: {mlp_f1:.3f}")
