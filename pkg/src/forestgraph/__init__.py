"""Random-forest proximity graphs and graph-convolutional learning for tabular data.

Fit a forest on a tabular dataset, turn its pairwise proximities into a
thresholded graph, and train a graph convolutional network to classify every
row transductively.
"""

from .forest import (DecisionTree, ForestParams, RandomForest,
                     default_forest_grid, fit_forest, fit_tree, grid_search)
from .gcn import (GCNModel, MLPModel, TrainConfig, gcn_forward, head_forward,
                  init_gcn, loss_and_grads, mlp_baseline_train_predict,
                  predict, predict_proba, train)
from .graphs import (Adjacency, GraphData, assemble_graph, cosine_matrix,
                     jaccard_matrix, mean_neighbor_operator, rbf_matrix,
                     shift_to_unit_range, threshold_adjacency)
from .metrics import aggregate_seeds, stratified_kfold, weighted_f1
from .pipeline import (AlphaGrid, ExperimentConfig, ExperimentReport,
                       compare_similarities, mlp_baseline, rf_baseline,
                       run_experiment, run_pipeline, threshold_sweep)
from .proximity import (ProximityMatrix, extend_test_test, full_proximity,
                        oob_proximity, original_proximity, rfgap_proximity,
                        symmetrize)
from .tabular import (FeatureMatrix, SplitIndices, TabularDataset, encode,
                      load_csv, load_manifest, stratified_split)

__version__ = "0.1.0"

__all__ = [
    "Adjacency", "AlphaGrid", "DecisionTree", "ExperimentConfig",
    "ExperimentReport", "FeatureMatrix", "ForestParams", "GCNModel",
    "GraphData", "MLPModel", "ProximityMatrix", "RandomForest",
    "SplitIndices", "TabularDataset", "TrainConfig", "aggregate_seeds",
    "assemble_graph", "compare_similarities", "cosine_matrix",
    "default_forest_grid", "encode", "extend_test_test", "fit_forest",
    "fit_tree", "full_proximity", "gcn_forward", "grid_search",
    "head_forward", "init_gcn", "jaccard_matrix", "load_csv",
    "load_manifest", "loss_and_grads", "mean_neighbor_operator",
    "mlp_baseline", "mlp_baseline_train_predict", "oob_proximity",
    "original_proximity", "predict", "predict_proba", "rbf_matrix",
    "rf_baseline", "rfgap_proximity", "run_experiment", "run_pipeline",
    "shift_to_unit_range", "stratified_kfold", "stratified_split",
    "symmetrize", "threshold_adjacency", "threshold_sweep", "train",
    "weighted_f1",
]
