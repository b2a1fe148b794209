"""CSV ingestion and train/test splitting.

Labels are rank-mapped to 1..k (source files encode grades as 10/20/30 or
1.5/2.5 just as often as 1/2/3) and group values to 0..G-1.  The protected
attribute can also be derived by a median split on a numeric column; that
column, like the attribute itself, is excluded from the features so the
scorer never sees the group directly.  No normalization happens here: the
training pipeline standardizes on the training split only.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import DataError, Dataset

__all__ = ["load_csv", "split_train_test"]


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            rows = [row for row in reader if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path} needs a header row and at least one data row")
    return rows[0], rows[1:]


def _column(header: list[str], rows: list[list[str]], name: str) -> list[str]:
    if name not in header:
        raise DataError(f"column {name!r} not found; file has {header}")
    idx = header.index(name)
    values = []
    for row_num, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {row_num} has {len(row)} cells, header has "
                            f"{len(header)}")
        values.append(row[idx])
    return values


def _numeric(values: list[str], name: str) -> np.ndarray:
    out = np.empty(len(values))
    for row_num, cell in enumerate(values, start=1):
        try:
            out[row_num - 1] = float(cell)
        except ValueError:
            raise DataError(f"non-numeric cell at row {row_num}, column "
                            f"{name!r}: {cell!r}") from None
    return out


def _rank_map(values: list[str], name: str) -> tuple[np.ndarray, tuple]:
    """Dense rank of the sorted distinct values, numeric when possible."""
    try:
        keys = [float(v) for v in values]
    except ValueError:
        keys = values
    distinct = sorted(set(keys))
    index = {v: i for i, v in enumerate(distinct)}
    return np.array([index[v] for v in keys], dtype=np.int64), tuple(distinct)


def load_csv(path, label_col: str, attr_col: str | None = None,
             attr_median_split: str | None = None,
             feature_cols: list[str] | None = None) -> Dataset:
    """Parse a delimited file into a Dataset.

    Exactly one of attr_col / attr_median_split selects the group: a column
    of categorical values, or a numeric column split at its median (at or
    above the median is group 1).  feature_cols=None takes every remaining
    column.
    """
    if (attr_col is None) == (attr_median_split is None):
        raise DataError("pass exactly one of attr_col / attr_median_split")
    header, rows = _read_table(path)
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in header")

    raw_labels = _column(header, rows, label_col)
    ranks, distinct = _rank_map(raw_labels, label_col)
    if len(distinct) < 2:
        raise DataError(f"column {label_col!r} has fewer than 2 distinct labels")
    labels = ranks + 1

    if attr_col is not None:
        attr_source = attr_col
        attrs, attr_values = _rank_map(_column(header, rows, attr_col), attr_col)
        names = tuple(str(v) for v in attr_values)
    else:
        attr_source = attr_median_split
        column = _numeric(_column(header, rows, attr_median_split),
                          attr_median_split)
        attrs = (column >= np.median(column)).astype(np.int64)
        names = (f"{attr_median_split}<median", f"{attr_median_split}>=median")
        if attrs.min() == attrs.max():
            names = (names[attrs[0]],)
            attrs = np.zeros_like(attrs)

    if feature_cols is None:
        feature_cols = [c for c in header if c not in (label_col, attr_source)]
    if not feature_cols:
        raise DataError("no feature columns left")
    columns = [_numeric(_column(header, rows, c), c) for c in feature_cols]
    features = np.column_stack(columns)

    return Dataset(features=features, labels=labels, attrs=attrs,
                   num_classes=len(distinct), attribute_names=names)


def split_train_test(dataset: Dataset, test_fraction: float = 0.25,
                     seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded uniform split; each side keeps the original row order."""
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must lie in (0, 1)")
    n = dataset.n
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)
