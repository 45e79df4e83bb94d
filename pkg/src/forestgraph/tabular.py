"""Tabular dataset loading, encoding and splitting."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # NUMERIC or CATEGORICAL


@dataclass
class TabularDataset:
    """Columnar dataset with dense integer class labels.

    ``values`` holds one array per column: float64 for numeric columns,
    object (token) arrays for categorical ones. Labels are remapped to
    0..n_classes-1 in order of first appearance; ``label_names`` keeps the
    original tokens in that order.
    """

    columns: list[Column]
    values: list[np.ndarray]
    labels: np.ndarray
    n_classes: int
    label_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.n_classes < 2:
            raise ValueError("fewer than 2 classes")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("label out of range")
        present = np.bincount(self.labels, minlength=self.n_classes)
        if (present == 0).any():
            raise ValueError("every class must appear at least once")
        for col, vals in zip(self.columns, self.values):
            if col.kind == NUMERIC and not np.isfinite(vals.astype(np.float64)).all():
                raise ValueError(f"non-finite value in numeric column {col.name!r}")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def vocabulary(self, name: str) -> list[str]:
        """Distinct tokens of a categorical column, in first-appearance order."""
        for col, vals in zip(self.columns, self.values):
            if col.name == name:
                if col.kind != CATEGORICAL:
                    raise ValueError(f"column {name!r} is not categorical")
                return list(dict.fromkeys(vals.tolist()))
        raise KeyError(name)


@dataclass
class ColumnEncoding:
    name: str
    kind: str
    span: tuple[int, int]  # [start, stop) columns in the feature matrix
    vocabulary: list[str] | None = None  # categorical only
    mean: float | None = None  # numeric only
    std: float | None = None


@dataclass
class FeatureMatrix:
    """Real-valued design matrix plus the encoding used to build it."""

    values: np.ndarray
    encodings: list[ColumnEncoding]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def categorical_tokens(self, name: str) -> list[str]:
        """Recover the original tokens of a categorical column from its one-hot block."""
        for enc in self.encodings:
            if enc.name == name and enc.kind == CATEGORICAL:
                block = self.values[:, enc.span[0]:enc.span[1]]
                return [enc.vocabulary[k] for k in block.argmax(axis=1)]
        raise KeyError(name)


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def load_manifest(path: str | Path) -> TabularDataset:
    """Load a dataset described by a JSON manifest.

    The manifest has keys ``csv_path``, ``label_column`` and
    ``categorical_columns``; a relative ``csv_path`` is resolved against the
    manifest's directory.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    csv_path = Path(manifest["csv_path"])
    if not csv_path.is_absolute():
        csv_path = path.parent / csv_path
    return load_csv(csv_path, manifest["label_column"],
                    set(manifest.get("categorical_columns", [])))


def load_csv(path: str | Path, label_column: str,
             categorical_columns: set[str] | None = None) -> TabularDataset:
    """Read a headered CSV into a TabularDataset.

    Columns not named in ``categorical_columns`` are parsed as numeric; a cell
    that fails to parse is an error, as are missing (empty) cells. Labels are
    coded densely by first appearance.
    """
    categorical_columns = set(categorical_columns or ())
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        rows = [r for r in reader if r]
    if label_column not in header:
        raise ValueError(f"label column {label_column!r} not found in header")
    if not rows:
        raise ValueError(f"{path}: no data rows")

    label_pos = header.index(label_column)
    feature_names = [h for i, h in enumerate(header) if i != label_pos]
    unknown = categorical_columns - set(feature_names)
    if unknown:
        raise ValueError(f"categorical columns not in header: {sorted(unknown)}")

    label_map: dict[str, int] = {}
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"row {i + 1}: expected {len(header)} cells, got {len(row)}")
        tok = row[label_pos]
        if tok == "":
            raise ValueError(f"row {i + 1}: missing label")
        labels[i] = label_map.setdefault(tok, len(label_map))
    if len(label_map) < 2:
        raise ValueError("fewer than 2 classes")

    columns: list[Column] = []
    values: list[np.ndarray] = []
    for j, name in enumerate(header):
        if j == label_pos:
            continue
        cells = [row[j] for row in rows]
        if any(c == "" for c in cells):
            k = next(i for i, c in enumerate(cells) if c == "")
            raise ValueError(f"row {k + 1}: missing value in column {name!r}")
        if name in categorical_columns:
            columns.append(Column(name, CATEGORICAL))
            values.append(np.array(cells, dtype=object))
        else:
            try:
                parsed = np.array([float(c) for c in cells], dtype=np.float64)
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise ValueError(
                    f"non-numeric cell {bad!r} in numeric column {name!r}") from None
            columns.append(Column(name, NUMERIC))
            values.append(parsed)

    return TabularDataset(columns=columns, values=values, labels=labels,
                          n_classes=len(label_map), label_names=list(label_map))


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def encode(dataset: TabularDataset, fit_rows: np.ndarray | list[int]) -> FeatureMatrix:
    """Encode a dataset as a real matrix.

    Numeric columns are standardized with mean/std computed on ``fit_rows``
    only (population std; constant columns map to all zeros). Categorical
    columns are one-hot encoded over the full-dataset vocabulary. The same
    transform is applied to every row.
    """
    fit_rows = np.asarray(fit_rows, dtype=np.int64)
    if fit_rows.size == 0:
        raise ValueError("fit_rows must be non-empty")

    blocks: list[np.ndarray] = []
    encodings: list[ColumnEncoding] = []
    start = 0
    for col, vals in zip(dataset.columns, dataset.values):
        if col.kind == NUMERIC:
            x = vals.astype(np.float64)
            mean = float(x[fit_rows].mean())
            std = float(x[fit_rows].std())
            if std == 0.0:
                std = 1.0
            blocks.append(((x - mean) / std)[:, None])
            encodings.append(ColumnEncoding(col.name, NUMERIC, (start, start + 1),
                                            mean=mean, std=std))
            start += 1
        else:
            vocab = dataset.vocabulary(col.name)
            index = {tok: k for k, tok in enumerate(vocab)}
            onehot = np.zeros((dataset.n_rows, len(vocab)), dtype=np.float64)
            for i, tok in enumerate(vals):
                onehot[i, index[tok]] = 1.0
            blocks.append(onehot)
            encodings.append(ColumnEncoding(col.name, CATEGORICAL,
                                            (start, start + len(vocab)),
                                            vocabulary=vocab))
            start += len(vocab)

    matrix = np.hstack(blocks) if blocks else np.zeros((dataset.n_rows, 0))
    return FeatureMatrix(values=matrix, encodings=encodings)


def stratified_split(dataset: TabularDataset, train_fraction: float,
                     seed: int) -> SplitIndices:
    """Class-stratified train/test partition.

    Per-class train counts are round-half-up(class_count * train_fraction);
    remaining rows go to test. Deterministic for a given seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for k in range(dataset.n_classes):
        members = np.flatnonzero(dataset.labels == k)
        n_train = int(np.floor(len(members) * train_fraction + 0.5))
        if n_train == 0:
            raise ValueError(f"class {k} would have no training rows")
        order = rng.permutation(len(members))
        train_parts.append(members[order[:n_train]])
        test_parts.append(members[order[n_train:]])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts)) if any(p.size for p in test_parts) \
        else np.array([], dtype=np.int64)
    return SplitIndices(train=train, test=test, seed=seed)
