"""Synthetic tabular datasets for tests and demos."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .tabular import CATEGORICAL, NUMERIC, Column, TabularDataset


def make_blobs(n_rows: int, n_classes: int = 2, n_features: int = 2,
               separation: float = 3.0, noise_features: int = 0,
               seed: int = 0) -> TabularDataset:
    """Gaussian blobs with unit within-class scale.

    Class centers sit on a scaled simplex so neighboring centers are
    ``separation`` standard deviations apart. ``noise_features`` appends
    label-independent standard-normal columns.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_classes, n_features))
    centers -= centers.mean(axis=0)
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers = centers / np.where(norms > 0, norms, 1.0) * separation
    labels = np.arange(n_rows) % n_classes
    labels = labels[rng.permutation(n_rows)]
    X = centers[labels] + rng.normal(size=(n_rows, n_features))
    if noise_features:
        X = np.hstack([X, rng.normal(size=(n_rows, noise_features))])
    columns = [Column(f"x{j}", NUMERIC) for j in range(X.shape[1])]
    values = [X[:, j].copy() for j in range(X.shape[1])]
    return TabularDataset(columns=columns, values=values, labels=labels,
                          n_classes=n_classes,
                          label_names=[str(k) for k in range(n_classes)])


def write_dataset_csv(dataset: TabularDataset, csv_path: str | Path,
                      label_column: str = "label") -> None:
    """Write a TabularDataset back out as a headered CSV."""
    csv_path = Path(csv_path)
    names = [c.name for c in dataset.columns]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names + [label_column]) + "\n")
        for i in range(dataset.n_rows):
            cells = []
            for col, vals in zip(dataset.columns, dataset.values):
                cells.append(str(vals[i]) if col.kind == CATEGORICAL
                             else repr(float(vals[i])))
            cells.append(dataset.label_names[dataset.labels[i]])
            fh.write(",".join(cells) + "\n")


def write_manifest(dataset: TabularDataset, directory: str | Path,
                   stem: str = "dataset", label_column: str = "label") -> Path:
    """Write <stem>.csv plus a manifest JSON next to it; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    write_dataset_csv(dataset, csv_path, label_column)
    manifest = {
        "csv_path": csv_path.name,
        "label_column": label_column,
        "categorical_columns": [c.name for c in dataset.columns
                                if c.kind == CATEGORICAL],
    }
    manifest_path = directory / f"{stem}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest_path
