"""Command-line entry points for the experiment harness."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .forest import default_forest_grid, fit_forest, grid_search, with_seed
from .gcn import MLP_DIMS_LARGE, MLP_DIMS_SMALL
from .graphs import write_edge_list, threshold_adjacency
from .metrics import aggregate_seeds
from .pipeline import (AlphaGrid, CompareRow, ExperimentConfig, PipelineError,
                       compare_similarities, mlp_baseline, rf_baseline,
                       run_experiment, threshold_sweep, write_baseline_csv,
                       write_compare_csv, write_report, write_sweep_csv,
                       write_timings)
from .proximity import full_proximity
from .tabular import encode, load_manifest, stratified_split


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestgraph",
        description="Forest-proximity graphs and GCN training on tabular data")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_alpha=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="run a single seed instead of the configured list")
        if needs_alpha:
            p.add_argument("--alpha", type=float, default=None,
                           help="pin the threshold grid to one value")
        p.add_argument("--proximity", default=None,
                       choices=["original", "oob", "rfgap"],
                       help="restrict to one proximity kind")
        p.add_argument("--out", default=None, help="output directory override")

    common(sub.add_parser("run", help="full pipeline with CV selection"))
    common(sub.add_parser("sweep", help="threshold sensitivity sweep"))
    common(sub.add_parser("compare", help="proximity vs feature-space similarities"))
    common(sub.add_parser("baseline", help="random forest and MLP baselines"))
    export = sub.add_parser("export-graph", help="write a thresholded edge list")
    common(export, needs_alpha=False)
    export.add_argument("--alpha", type=float, required=True,
                        help="threshold for the exported graph")
    return parser


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if getattr(args, "alpha", None) is not None and args.command != "export-graph":
        config = replace(config, alpha_grid=AlphaGrid(1, args.alpha, args.alpha))
    if args.proximity is not None:
        config = replace(config, proximity_kinds=(args.proximity,))
    if args.out is not None:
        config = replace(config, output_dir=args.out)
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(config: ExperimentConfig) -> int:
    report, timings = run_experiment(config)
    out = _out_dir(config)
    write_report(report, out / "report.json")
    write_timings(timings, out / "timings.json")
    for r in report.seed_results:
        print(f"seed {r.seed}: kind={r.selected_kind} alpha={r.selected_alpha:.2f} "
              f"cv_f1={r.selected_cv_f1:.3f} test_f1={r.test_f1:.3f}")
    print(f"test weighted F1: {report.mean_test_f1:.3f} "
          f"+/- {report.std_test_f1:.3f}")
    print(f"report written to {out / 'report.json'}")
    return 0


def _cmd_sweep(config: ExperimentConfig, kind: str | None) -> int:
    kind = kind or config.proximity_kinds[0]
    rows = threshold_sweep(config, kind)
    out = _out_dir(config)
    write_sweep_csv(rows, out / "sweep.csv")
    best = max(rows, key=lambda r: r.mean_f1)
    print(f"{len(rows)} thresholds swept for kind={kind}; "
          f"best alpha={best.alpha:.2f} with F1 {best.mean_f1:.3f}")
    print(f"sweep written to {out / 'sweep.csv'}")
    return 0


def _cmd_compare(config: ExperimentConfig) -> int:
    rows = compare_similarities(config)
    out = _out_dir(config)
    write_compare_csv(rows, out / "compare.csv")
    for r in rows:
        print(f"{r.measure:>10}: {r.mean_f1:.3f} +/- {r.std_f1:.3f}")
    print(f"comparison written to {out / 'compare.csv'}")
    return 0


def _cmd_baseline(config: ExperimentConfig) -> int:
    dataset = load_manifest(config.manifest)
    rows = []
    rf_scores = [rf_baseline(config, s, dataset) for s in config.seeds]
    rows.append(CompareRow("rf", *aggregate_seeds(rf_scores)))
    for dims in (MLP_DIMS_SMALL, MLP_DIMS_LARGE):
        scores = [mlp_baseline(config, s, dims, dataset) for s in config.seeds]
        rows.append(CompareRow(f"mlp_{dims[0]}_{dims[1]}",
                               *aggregate_seeds(scores)))
    out = _out_dir(config)
    write_baseline_csv(rows, out / "baseline.csv")
    for r in rows:
        print(f"{r.measure:>12}: {r.mean_f1:.3f} +/- {r.std_f1:.3f}")
    print(f"baselines written to {out / 'baseline.csv'}")
    return 0


def _cmd_export_graph(config: ExperimentConfig, alpha: float) -> int:
    dataset = load_manifest(config.manifest)
    seed = config.seeds[0]
    kind = config.proximity_kinds[0]
    split = stratified_split(dataset, config.train_fraction, seed)
    fm = encode(dataset, split.train)
    grid = [with_seed(p, seed) for p in
            (config.forest_grid if config.forest_grid is not None
             else default_forest_grid())]
    params = grid[0] if len(grid) == 1 else grid_search(
        fm.values[split.train], dataset.labels[split.train], grid,
        config.cv_folds, fold_seed=seed)
    forest = fit_forest(fm.values[split.train], dataset.labels[split.train],
                        params, n_classes=dataset.n_classes)
    leaves = forest.apply(fm.values)
    P = full_proximity(forest, leaves, split.train, split.test, kind)
    adj = threshold_adjacency(P, alpha)
    out = _out_dir(config)
    path = out / f"graph_{kind}_seed{seed}_alpha{alpha:g}.edges"
    write_edge_list(adj, path)
    print(f"{adj.edge_count} edges written to {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "run":
            return _cmd_run(config)
        if args.command == "sweep":
            return _cmd_sweep(config, args.proximity)
        if args.command == "compare":
            return _cmd_compare(config)
        if args.command == "baseline":
            return _cmd_baseline(config)
        if args.command == "export-graph":
            return _cmd_export_graph(config, args.alpha)
        raise ValueError(f"unknown command {args.command!r}")
    except PipelineError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
