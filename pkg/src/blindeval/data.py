"""Plaintext dataset handling on the data owner's side."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from blindeval.reference import class_loss


class DataValidationError(ValueError):
    pass


@dataclass
class PlainDataset:
    columns: list[str]  # feature names
    X: np.ndarray  # (n, m) of 0/1
    y: np.ndarray  # (n,) of 0/1
    label_column: str = "label"
    feature_bits: int = 1  # >1 for word-valued features (threshold prediction)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise DataValidationError("feature matrix shape does not match column names")
        if self.y.shape != (self.X.shape[0],):
            raise DataValidationError("label column length differs from row count")
        if self.feature_bits < 1:
            raise DataValidationError("feature_bits must be at least 1")
        if self.X.size and (self.X.min() < 0 or self.X.max() >= 2**self.feature_bits):
            raise DataValidationError(f"feature values must fit in {self.feature_bits} unsigned bits")
        if not np.isin(self.y, (0, 1)).all():
            raise DataValidationError("labels must be binary")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def m_features(self) -> int:
        return self.X.shape[1]

    def select_columns(self, names) -> "PlainDataset":
        idx = [self.columns.index(c) for c in names]
        return PlainDataset(list(names), self.X[:, idx], self.y, self.label_column, self.feature_bits)

    def subset(self, rows) -> "PlainDataset":
        rows = np.asarray(rows)
        return PlainDataset(list(self.columns), self.X[rows], self.y[rows], self.label_column, self.feature_bits)


def ingest_csv(path: str | Path, label_column: str, *, feature_bits: int = 1) -> PlainDataset:
    """Read a headered CSV of 0/1 cells. Errors name the offending row/column.

    With ``feature_bits`` > 1 feature cells may be any unsigned integer of that
    width; labels stay binary.
    """
    limit = 2**feature_bits
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataValidationError(f"{path}: label column {label_column!r} not found in header")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataValidationError(
                    f"{path}: line {lineno} has {len(raw)} cells, header has {len(header)}"
                )
            row = []
            for name, cell in zip(header, raw):
                cell = cell.strip()
                top = 2 if name == label_column else limit
                if not (cell.isdigit() and int(cell) < top):
                    allowed = "0 or 1" if top == 2 else f"an integer in 0..{top - 1}"
                    raise DataValidationError(
                        f"{path}: line {lineno}, column {name!r}: value {cell!r} is not {allowed}"
                    )
                row.append(int(cell))
            rows.append(row)
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.int64)
    li = header.index(label_column)
    feats = [h for h in header if h != label_column]
    X = np.delete(table, li, axis=1)
    return PlainDataset(feats, X, table[:, li], label_column, feature_bits)


def export_csv(ds: PlainDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ds.columns + [ds.label_column])
        for row, label in zip(ds.X, ds.y):
            w.writerow([int(v) for v in row] + [int(label)])


def stratified_sample(ds: PlainDataset, k: int, seed: int | None = None) -> PlainDataset:
    """``k`` rows whose per-class counts follow the population (largest remainder)."""
    n = ds.n_rows
    if not 1 <= k <= n:
        raise ValueError(f"sample size {k} outside 1..{n}")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(ds.y, return_counts=True)
    exact = counts * k / n
    alloc = np.floor(exact).astype(int)
    short = k - alloc.sum()
    # break remainder ties toward the larger class, then lower label
    order = sorted(range(len(classes)), key=lambda i: (-(exact[i] - alloc[i]), -counts[i], classes[i]))
    for i in order[:short]:
        alloc[i] += 1
    picked = []
    for cls, a in zip(classes, alloc):
        idx = np.flatnonzero(ds.y == cls)
        picked.extend(rng.choice(idx, size=a, replace=False).tolist())
    picked = rng.permutation(np.array(picked, dtype=np.int64))
    return ds.subset(picked)


def gen_synthetic(
    n: int,
    m: int,
    *,
    planted_feature: int = 0,
    signal: float = 1.0,
    seed: int | None = None,
) -> PlainDataset:
    """Random binary features; the label copies ``planted_feature`` with
    probability ``signal`` and is its complement otherwise."""
    if not 0 <= planted_feature < m:
        raise ValueError("planted_feature out of range")
    if not 0.0 <= signal <= 1.0:
        raise ValueError("signal must be a probability")
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 2, size=(n, m))
    flip = rng.random(n) >= signal
    y = X[:, planted_feature] ^ flip.astype(np.int64)
    return PlainDataset([f"f{j}" for j in range(m)], X, y)


def select_k_best(ds: PlainDataset, k: int) -> PlainDataset:
    """Keep the ``k`` features with the lowest plaintext class loss (stable)."""
    if not 1 <= k <= ds.m_features:
        raise ValueError(f"k must be in 1..{ds.m_features}")
    if ds.feature_bits != 1:
        raise ValueError("class-loss filtering needs binary features")
    valid = np.ones(ds.n_rows, dtype=bool)
    losses = [class_loss(ds.X[:, j], ds.y, valid) for j in range(ds.m_features)]
    keep = sorted(sorted(range(ds.m_features), key=lambda j: losses[j])[:k])
    return ds.select_columns([ds.columns[j] for j in keep])


def train_test_split(ds: PlainDataset, test_fraction: float, seed: int | None = None):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(ds.n_rows)
    cut = int(round(ds.n_rows * (1 - test_fraction)))
    return ds.subset(idx[:cut]), ds.subset(idx[cut:])


def ingest_ternary_csv(path: str | Path, label_column: str = "Result") -> PlainDataset:
    """Read a CSV whose cells are -1/0/1 (e.g. the public phishing-website
    table) and binarize every cell as ``value == 1``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or label_column not in reader.fieldnames:
            raise DataValidationError(f"{path}: label column {label_column!r} not found in header")
        feats = [c for c in reader.fieldnames if c != label_column and c.lower() not in ("id", "index")]
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            vals = []
            for name in feats + [label_column]:
                cell = (rec.get(name) or "").strip()
                if cell not in ("-1", "0", "1"):
                    raise DataValidationError(
                        f"{path}: line {lineno}, column {name!r}: value {cell!r} is not -1, 0 or 1"
                    )
                vals.append(int(cell == "1"))
            rows.append(vals[:-1])
            labels.append(vals[-1])
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    return PlainDataset(feats, np.array(rows), np.array(labels))
