"""End-to-end experiment pipeline: forest -> proximities -> graph -> GCN.

The per-seed flow: stratified split, forest grid search on the training rows,
proximity matrices over all rows, then cross-validated selection of the
(proximity kind, threshold) pair by weighted F1 before the final transductive
GCN is trained with every training label and scored on the test rows.

Report JSON is fully deterministic for a fixed config and seeds; wall-clock
timings go to a separate sidecar file so reruns stay byte-identical.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .forest import (ForestParams, default_forest_grid, fit_forest,
                     grid_search, with_seed)
from .gcn import TrainConfig, mlp_baseline_train_predict, predict, train
from .graphs import (assemble_graph, cosine_matrix, jaccard_matrix,
                     rbf_matrix, shift_to_unit_range, threshold_adjacency)
from .metrics import aggregate_seeds, stratified_kfold, weighted_f1
from .proximity import KINDS, ProximityMatrix, full_proximity
from .tabular import TabularDataset, encode, load_manifest, stratified_split

MAX_DENSE_ROWS = 60_000
BASELINE_MEASURES = ("cosine", "jaccard", "rbf")
# Selection tie-break order across proximity kinds (after score and alpha).
KIND_PRIORITY = {"original": 0, "rfgap": 1, "oob": 2}


class PipelineError(RuntimeError):
    """Stage-tagged failure raised by the experiment pipeline."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class AlphaGrid:
    count: int = 51
    min: float = 0.0
    max: float = 1.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("alpha grid needs at least one point")
        if self.min > self.max:
            raise ValueError("alpha grid min must not exceed max")

    def points(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.min])
        return np.linspace(self.min, self.max, self.count)


@dataclass
class ExperimentConfig:
    manifest: str
    proximity_kinds: tuple[str, ...] = ("original", "oob", "rfgap")
    alpha_grid: AlphaGrid = field(default_factory=AlphaGrid)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    cv_folds: int = 5
    train_fraction: float = 0.8
    forest_grid: list[ForestParams] | None = None  # None -> full default grid
    gcn: TrainConfig = field(default_factory=TrainConfig)
    rbf_gamma: float = 0.01
    strict_per_fold_forest: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        self.proximity_kinds = tuple(self.proximity_kinds)
        self.seeds = tuple(int(s) for s in self.seeds)
        for kind in self.proximity_kinds:
            if kind not in KINDS:
                raise ValueError(f"unknown proximity kind {kind!r}")
        if not self.proximity_kinds:
            raise ValueError("need at least one proximity kind")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")

    def to_dict(self) -> dict:
        out = {
            "manifest": self.manifest,
            "proximity_kinds": list(self.proximity_kinds),
            "alpha_grid": asdict(self.alpha_grid),
            "seeds": list(self.seeds),
            "cv_folds": self.cv_folds,
            "train_fraction": self.train_fraction,
            "forest_grid": None if self.forest_grid is None else
                [asdict(p) for p in self.forest_grid],
            "gcn": asdict(self.gcn) | {"hidden_dims": list(self.gcn.hidden_dims)},
            "rbf_gamma": self.rbf_gamma,
            "strict_per_fold_forest": self.strict_per_fold_forest,
            "output_dir": self.output_dir,
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        raw = dict(raw)
        manifest = raw.pop("manifest")
        if base_dir is not None and not Path(manifest).is_absolute():
            manifest = str(base_dir / manifest)
        grid_raw = raw.pop("forest_grid", None)
        gcn_raw = dict(raw.pop("gcn", {}))
        if "hidden_dims" in gcn_raw:
            gcn_raw["hidden_dims"] = tuple(gcn_raw["hidden_dims"])
        alpha_raw = raw.pop("alpha_grid", {})
        return cls(
            manifest=manifest,
            alpha_grid=AlphaGrid(**alpha_raw),
            forest_grid=None if grid_raw is None else
                [ForestParams(**p) for p in grid_raw],
            gcn=TrainConfig(**gcn_raw),
            **{k: v for k, v in raw.items()},
        )

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)


@dataclass
class CvCell:
    kind: str
    alpha: float
    cv_f1: float


@dataclass
class SeedResult:
    seed: int
    forest_params: ForestParams
    cv_table: list[CvCell]
    selected_kind: str
    selected_alpha: float
    selected_cv_f1: float
    test_f1: float
    test_predictions: list[int]


@dataclass
class ExperimentReport:
    config: dict
    seed_results: list[SeedResult]
    mean_test_f1: float
    std_test_f1: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_seed": [
                {
                    "seed": r.seed,
                    "forest_params": asdict(r.forest_params),
                    "cv_table": [asdict(c) for c in r.cv_table],
                    "selected_kind": r.selected_kind,
                    "selected_alpha": r.selected_alpha,
                    "selected_cv_f1": r.selected_cv_f1,
                    "test_f1": r.test_f1,
                    "test_predictions": r.test_predictions,
                }
                for r in self.seed_results
            ],
            "mean_test_f1": self.mean_test_f1,
            "std_test_f1": self.std_test_f1,
        }


def _check_size(dataset: TabularDataset) -> None:
    if dataset.n_rows > MAX_DENSE_ROWS:
        raise ValueError(
            f"dataset has {dataset.n_rows} rows; dense proximity storage is "
            f"rejected above {MAX_DENSE_ROWS}. Compute proximities through the "
            "sparse path (forestgraph.proximity with a smaller dense_limit) "
            "and drive the graph construction directly.")


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


@dataclass
class MeasureEval:
    kind: str
    cells: list[CvCell]
    best_alpha: float
    best_cv_f1: float
    test_f1: float
    test_pred: np.ndarray


def _evaluate_measure(P: ProximityMatrix | np.ndarray, kind: str, X, y, split,
                      fold_nodes, alphas, gcn_cfg, n_classes) -> MeasureEval:
    """CV-select alpha for one similarity measure, then score the test rows.

    Fold scores mask held-out labels inside a fixed graph; ties between
    equal CV scores prefer the higher (sparser) alpha.
    """
    cells = []
    best = None  # (cv_f1, alpha)
    for alpha in alphas:
        adj = threshold_adjacency(P, float(alpha), kind=kind)
        base = assemble_graph(adj, X, y, split, n_classes)
        scores = []
        for nodes in fold_nodes:
            keep = np.setdiff1d(split.train, nodes)
            g = base.restrict_training(keep)
            model = train(g, gcn_cfg)
            pred = predict(g, model)
            scores.append(weighted_f1(y[nodes], pred[nodes], n_classes))
        cv = float(np.mean(scores))
        cells.append(CvCell(kind, float(alpha), cv))
        if best is None or (cv, alpha) >= best:
            best = (cv, float(alpha))
    cv_f1, alpha = best
    adj = threshold_adjacency(P, alpha, kind=kind)
    graph = assemble_graph(adj, X, y, split, n_classes)
    model = train(graph, gcn_cfg)
    pred = predict(graph, model)
    test_f1 = weighted_f1(y[split.test], pred[split.test], n_classes)
    return MeasureEval(kind, cells, alpha, cv_f1, test_f1, pred[split.test])


def _strict_cv_table(config, X, y, split, fold_nodes, params, alphas,
                     gcn_cfg, n_classes) -> dict[tuple[str, float], list[float]]:
    """Strict mode: refit the forest per CV fold before building each graph."""
    scores: dict[tuple[str, float], list[float]] = {}
    for nodes in fold_nodes:
        keep = np.setdiff1d(split.train, nodes)
        forest = fit_forest(X[keep], y[keep], params, n_classes=n_classes)
        leaves = forest.apply(X)
        others = np.setdiff1d(np.arange(len(y)), keep)
        for kind in config.proximity_kinds:
            P = full_proximity(forest, leaves, keep, others, kind)
            for alpha in alphas:
                adj = threshold_adjacency(P, float(alpha))
                base = assemble_graph(adj, X, y, split, n_classes)
                g = base.restrict_training(keep)
                model = train(g, gcn_cfg)
                pred = predict(g, model)
                key = (kind, float(alpha))
                scores.setdefault(key, []).append(
                    weighted_f1(y[nodes], pred[nodes], n_classes))
    return scores


def _select(cands: list[tuple[float, float, str]]) -> tuple[float, float, str]:
    """Pick (cv_f1, alpha, kind): max score, then higher alpha, then kind order."""
    return max(cands, key=lambda c: (c[0], c[1], -KIND_PRIORITY[c[2]]))


def run_pipeline(config: ExperimentConfig, seed: int,
              dataset: TabularDataset | None = None,
              split=None) -> SeedResult:
    """One full pipeline run for one seed."""
    if dataset is None:
        dataset = _stage("load", load_manifest, config.manifest)
    _check_size(dataset)
    if split is None:
        split = _stage("split", stratified_split, dataset,
                       config.train_fraction, seed)
    fm = _stage("encode", encode, dataset, split.train)
    X, y, c = fm.values, dataset.labels, dataset.n_classes

    grid = config.forest_grid if config.forest_grid is not None \
        else default_forest_grid()
    grid = [with_seed(p, seed) for p in grid]
    if len(grid) == 1:
        params = grid[0]
    else:
        params = _stage("forest-grid-search", grid_search, X[split.train],
                        y[split.train], grid, config.cv_folds, fold_seed=seed)
    forest = _stage("forest-fit", fit_forest, X[split.train], y[split.train],
                    params, n_classes=c)
    leaves = _stage("forest-apply", forest.apply, X)

    alphas = config.alpha_grid.points()
    folds = stratified_kfold(y[split.train], config.cv_folds, seed)
    fold_nodes = [split.train[f] for f in folds]
    gcn_cfg = replace(config.gcn, seed=seed)

    cv_table: list[CvCell] = []
    if config.strict_per_fold_forest:
        table = _stage("gcn-cv", _strict_cv_table, config, X, y, split,
                       fold_nodes, params, alphas, gcn_cfg, c)
        cands = []
        for (kind, alpha), vals in table.items():
            cv = float(np.mean(vals))
            cv_table.append(CvCell(kind, alpha, cv))
            cands.append((cv, alpha, kind))
        cv_f1, best_alpha, best_kind = _select(cands)
        P = _stage("proximity", full_proximity, forest, leaves,
                   split.train, split.test, best_kind)
        adj = threshold_adjacency(P, best_alpha)
        graph = assemble_graph(adj, X, y, split, c)
        model = _stage("gcn-final", train, graph, gcn_cfg)
        pred = predict(graph, model)
        test_pred = pred[split.test]
        test_f1 = weighted_f1(y[split.test], test_pred, c)
    else:
        evals = []
        for kind in config.proximity_kinds:
            P = _stage("proximity", full_proximity, forest, leaves,
                       split.train, split.test, kind)
            evals.append(_stage("gcn-cv", _evaluate_measure, P, kind, X, y,
                                split, fold_nodes, alphas, gcn_cfg, c))
            cv_table.extend(evals[-1].cells)
        cv_f1, best_alpha, best_kind = _select(
            [(e.best_cv_f1, e.best_alpha, e.kind) for e in evals])
        chosen = next(e for e in evals if e.kind == best_kind)
        test_f1 = chosen.test_f1
        test_pred = chosen.test_pred

    return SeedResult(seed=seed, forest_params=params, cv_table=cv_table,
                      selected_kind=best_kind, selected_alpha=float(best_alpha),
                      selected_cv_f1=float(cv_f1), test_f1=float(test_f1),
                      test_predictions=[int(v) for v in test_pred])


def run_experiment(config: ExperimentConfig) -> tuple[ExperimentReport, dict]:
    """Run every configured seed; returns the report and a timing sidecar dict."""
    dataset = _stage("load", load_manifest, config.manifest)
    results = []
    timings = {}
    for seed in config.seeds:
        start = time.perf_counter()
        results.append(run_pipeline(config, seed, dataset=dataset))
        timings[f"seed_{seed}_sec"] = time.perf_counter() - start
    mean, std = aggregate_seeds([r.test_f1 for r in results])
    report = ExperimentReport(config=config.to_dict(), seed_results=results,
                              mean_test_f1=mean, std_test_f1=std)
    return report, timings


@dataclass
class SweepRow:
    alpha: float
    mean_f1: float
    std_f1: float
    edge_count: float  # mean over seeds


def threshold_sweep(config: ExperimentConfig, kind: str,
                    dataset: TabularDataset | None = None) -> list[SweepRow]:
    """Sensitivity mode: every alpha scored on the test rows, no selection."""
    if kind not in KINDS:
        raise ValueError(f"unknown proximity kind {kind!r}")
    if dataset is None:
        dataset = _stage("load", load_manifest, config.manifest)
    _check_size(dataset)
    alphas = config.alpha_grid.points()
    f1 = np.empty((len(config.seeds), len(alphas)))
    edges = np.empty_like(f1)
    for si, seed in enumerate(config.seeds):
        split = stratified_split(dataset, config.train_fraction, seed)
        fm = encode(dataset, split.train)
        X, y, c = fm.values, dataset.labels, dataset.n_classes
        grid = [with_seed(p, seed) for p in
                (config.forest_grid if config.forest_grid is not None
                 else default_forest_grid())]
        params = grid[0] if len(grid) == 1 else _stage(
            "forest-grid-search", grid_search, X[split.train], y[split.train],
            grid, config.cv_folds, fold_seed=seed)
        forest = fit_forest(X[split.train], y[split.train], params, n_classes=c)
        leaves = forest.apply(X)
        P = full_proximity(forest, leaves, split.train, split.test, kind)
        gcn_cfg = replace(config.gcn, seed=seed)
        for ai, alpha in enumerate(alphas):
            adj = threshold_adjacency(P, float(alpha))
            graph = assemble_graph(adj, X, y, split, c)
            model = train(graph, gcn_cfg)
            pred = predict(graph, model)
            f1[si, ai] = weighted_f1(y[split.test], pred[split.test], c)
            edges[si, ai] = adj.edge_count
    return [
        SweepRow(float(a), *aggregate_seeds(f1[:, ai]),
                 edge_count=float(edges[:, ai].mean()))
        for ai, a in enumerate(alphas)
    ]


@dataclass
class CompareRow:
    measure: str
    mean_f1: float
    std_f1: float


def similarity_matrix(measure: str, X: np.ndarray, rbf_gamma: float) -> np.ndarray:
    """Feature-space baseline similarities, each in [0, 1].

    Cosine and Jaccard run on per-column min-max shifted features so every
    value is nonnegative; RBF runs on the encoded features directly and is
    min-max rescaled.
    """
    if measure == "cosine":
        return np.clip(cosine_matrix(shift_to_unit_range(X)), 0.0, 1.0)
    if measure == "jaccard":
        return jaccard_matrix(shift_to_unit_range(X))
    if measure == "rbf":
        return rbf_matrix(X, rbf_gamma)
    raise ValueError(f"unknown similarity measure {measure!r}")


def compare_similarities(config: ExperimentConfig,
                         dataset: TabularDataset | None = None) -> list[CompareRow]:
    """Same pipeline and selection protocol for every similarity measure,
    with paired seeds and splits."""
    if dataset is None:
        dataset = _stage("load", load_manifest, config.manifest)
    _check_size(dataset)
    measures = list(config.proximity_kinds) + list(BASELINE_MEASURES)
    alphas = config.alpha_grid.points()
    scores: dict[str, list[float]] = {m: [] for m in measures}
    for seed in config.seeds:
        split = stratified_split(dataset, config.train_fraction, seed)
        fm = encode(dataset, split.train)
        X, y, c = fm.values, dataset.labels, dataset.n_classes
        folds = stratified_kfold(y[split.train], config.cv_folds, seed)
        fold_nodes = [split.train[f] for f in folds]
        gcn_cfg = replace(config.gcn, seed=seed)

        grid = [with_seed(p, seed) for p in
                (config.forest_grid if config.forest_grid is not None
                 else default_forest_grid())]
        params = grid[0] if len(grid) == 1 else _stage(
            "forest-grid-search", grid_search, X[split.train], y[split.train],
            grid, config.cv_folds, fold_seed=seed)
        forest = fit_forest(X[split.train], y[split.train], params, n_classes=c)
        leaves = forest.apply(X)

        for measure in measures:
            if measure in KINDS:
                sim = full_proximity(forest, leaves, split.train,
                                     split.test, measure)
            else:
                sim = similarity_matrix(measure, X, config.rbf_gamma)
            ev = _evaluate_measure(sim, measure, X, y, split, fold_nodes,
                                   alphas, gcn_cfg, c)
            scores[measure].append(ev.test_f1)
    return [CompareRow(m, *aggregate_seeds(scores[m])) for m in measures]


def rf_baseline(config: ExperimentConfig, seed: int,
                dataset: TabularDataset | None = None) -> float:
    """Grid-searched forest fit on the training rows, scored on the test rows."""
    if dataset is None:
        dataset = load_manifest(config.manifest)
    split = stratified_split(dataset, config.train_fraction, seed)
    fm = encode(dataset, split.train)
    X, y, c = fm.values, dataset.labels, dataset.n_classes
    grid = [with_seed(p, seed) for p in
            (config.forest_grid if config.forest_grid is not None
             else default_forest_grid())]
    params = grid[0] if len(grid) == 1 else grid_search(
        X[split.train], y[split.train], grid, config.cv_folds, fold_seed=seed)
    forest = fit_forest(X[split.train], y[split.train], params, n_classes=c)
    pred = forest.predict(X[split.test])
    return weighted_f1(y[split.test], pred, c)


def mlp_baseline(config: ExperimentConfig, seed: int,
                 hidden_dims: tuple[int, ...],
                 dataset: TabularDataset | None = None) -> float:
    """Feed-forward baseline with the given hidden widths, scored on test rows."""
    if dataset is None:
        dataset = load_manifest(config.manifest)
    split = stratified_split(dataset, config.train_fraction, seed)
    fm = encode(dataset, split.train)
    cfg = replace(config.gcn, seed=seed, n_layers=len(hidden_dims),
                  hidden_dims=tuple(hidden_dims))
    pred = mlp_baseline_train_predict(fm, dataset.labels, split, cfg)
    return weighted_f1(dataset.labels[split.test], pred, dataset.n_classes)


def _jsonify(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(_jsonify(report.to_dict()), indent=2, sort_keys=True)


def write_report(report: ExperimentReport, path: str | Path) -> None:
    Path(path).write_text(report_to_json(report) + "\n", encoding="utf-8")


def write_timings(timings: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(_jsonify(timings), indent=2, sort_keys=True)
                          + "\n", encoding="utf-8")


def write_sweep_csv(rows: list[SweepRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("alpha,mean_f1,std_f1,edge_count\n")
        for r in rows:
            fh.write(f"{r.alpha!r},{r.mean_f1!r},{r.std_f1!r},{r.edge_count!r}\n")


def write_compare_csv(rows: list[CompareRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("measure,mean_f1,std_f1\n")
        for r in rows:
            fh.write(f"{r.measure},{r.mean_f1!r},{r.std_f1!r}\n")


def write_baseline_csv(rows: list[CompareRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,mean_f1,std_f1\n")
        for r in rows:
            fh.write(f"{r.measure},{r.mean_f1!r},{r.std_f1!r}\n")
