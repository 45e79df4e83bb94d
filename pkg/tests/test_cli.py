import json

import pytest

from forestgraph.cli import main
from forestgraph.graphs import read_edge_list
from forestgraph.synthetic import make_blobs, write_manifest


@pytest.fixture
def config_path(tmp_path):
    ds = make_blobs(50, 2, separation=3.0, seed=0)
    write_manifest(ds, tmp_path)
    raw = {
        "manifest": "dataset.manifest.json",
        "proximity_kinds": ["original"],
        "alpha_grid": {"count": 3, "min": 0.0, "max": 0.6},
        "seeds": [0, 1],
        "cv_folds": 2,
        "train_fraction": 0.8,
        "forest_grid": [{"n_trees": 10, "seed": 0}],
        "gcn": {"learning_rate": 0.02, "epochs": 12, "n_layers": 1,
                "hidden_dims": [6], "head_hidden": 6, "seed": 0},
        "output_dir": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    return path


def test_run_writes_deterministic_report(config_path, tmp_path, capsys):
    assert main(["run", "--config", str(config_path), "--seed", "0"]) == 0
    out = tmp_path / "out"
    first = (out / "report.json").read_bytes()
    assert (out / "timings.json").exists()
    assert main(["run", "--config", str(config_path), "--seed", "0"]) == 0
    assert (out / "report.json").read_bytes() == first
    assert "test weighted F1" in capsys.readouterr().out


def test_run_alpha_and_proximity_overrides(config_path, tmp_path):
    assert main(["run", "--config", str(config_path), "--seed", "0",
                 "--alpha", "0.3", "--proximity", "rfgap",
                 "--out", str(tmp_path / "o2")]) == 0
    payload = json.loads((tmp_path / "o2" / "report.json").read_text())
    assert payload["per_seed"][0]["selected_alpha"] == 0.3
    assert payload["per_seed"][0]["selected_kind"] == "rfgap"
    assert [c["kind"] for c in payload["per_seed"][0]["cv_table"]] == ["rfgap"]


def test_sweep_writes_csv(config_path, tmp_path):
    assert main(["sweep", "--config", str(config_path), "--seed", "0"]) == 0
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "alpha,mean_f1,std_f1,edge_count"
    assert len(lines) == 4  # 3 alpha points


def test_compare_writes_csv(config_path, tmp_path):
    assert main(["compare", "--config", str(config_path), "--seed", "0",
                 "--alpha", "0.3"]) == 0
    lines = (tmp_path / "out" / "compare.csv").read_text().splitlines()
    assert lines[0] == "measure,mean_f1,std_f1"
    assert [ln.split(",")[0] for ln in lines[1:]] == \
        ["original", "cosine", "jaccard", "rbf"]


def test_baseline_writes_csv(config_path, tmp_path):
    assert main(["baseline", "--config", str(config_path), "--seed", "0"]) == 0
    lines = (tmp_path / "out" / "baseline.csv").read_text().splitlines()
    assert lines[0] == "model,mean_f1,std_f1"
    assert [ln.split(",")[0] for ln in lines[1:]] == \
        ["rf", "mlp_64_128", "mlp_128_256"]


def test_export_graph(config_path, tmp_path):
    assert main(["export-graph", "--config", str(config_path),
                 "--alpha", "0.4", "--seed", "0"]) == 0
    path = tmp_path / "out" / "graph_original_seed0_alpha0.4.edges"
    adj = read_edge_list(path)
    assert adj.n_nodes == 50
    assert adj.alpha == 0.4


def test_missing_config_fails_nonzero(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_manifest_fails_with_stage_tag(tmp_path, capsys):
    raw = {"manifest": "missing.manifest.json", "seeds": [0],
           "forest_grid": [{"n_trees": 5}],
           "gcn": {"epochs": 2, "hidden_dims": [4], "n_layers": 1},
           "output_dir": str(tmp_path / "o")}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    assert main(["run", "--config", str(path)]) == 1
    assert "[load]" in capsys.readouterr().err
