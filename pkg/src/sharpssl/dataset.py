"""Partially labeled datasets, CSV ingestion and column preprocessing.

Labels are 1-based class ids with 0 meaning "unlabeled".
"""
import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    InconsistentWidth,
    LabelOutOfRange,
    NotFinite,
    ParseError,
    ZeroVarianceColumn,
)


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray
    y: np.ndarray
    K: int
    feature_names: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=float))
        if x.ndim != 2:
            raise DataError(f"x must be 2-d, got shape {x.shape}")
        y = np.asarray(self.y)
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise DataError(f"y must have length {x.shape[0]}")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.asarray(y) == np.round(y)):
                raise LabelOutOfRange("labels must be integers")
        y = np.ascontiguousarray(y, dtype=np.int64)
        if x.shape[0] < 1:
            raise DataError("dataset needs at least one observation")
        if not np.all(np.isfinite(x)):
            raise NotFinite("feature matrix contains NaN or Inf")
        if self.K < 2:
            raise DataError(f"need K >= 2 classes, got {self.K}")
        if y.size and (y.min() < 0 or y.max() > self.K):
            raise LabelOutOfRange(f"labels must lie in 0..{self.K}")
        if self.feature_names is not None and len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length does not match the number of columns")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    @property
    def n_labeled(self):
        return int(np.count_nonzero(self.y))

    @property
    def n_unlabeled(self):
        return self.n - self.n_labeled

    @property
    def gamma(self):
        """Observed label fraction n_L / n."""
        return self.n_labeled / self.n

    def with_x(self, x, feature_names=None):
        return replace(self, x=x, feature_names=feature_names)

    def unlabeled(self):
        """Same covariates with every label hidden."""
        return replace(self, y=np.zeros(self.n, dtype=np.int64))

    def equals(self, other):
        return (
            self.K == other.K
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


def _parse_label(cell, token, row, column):
    cell = cell.strip()
    if cell == "" or cell == token:
        return 0
    try:
        val = float(cell)
    except ValueError:
        raise ParseError(f"label {cell!r} is not an integer", row, column) from None
    if val != int(val):
        raise ParseError(f"label {cell!r} is not an integer", row, column)
    val = int(val)
    if val < 0:
        raise LabelOutOfRange(f"negative label {val} at row {row}")
    return val


def load_csv(path, label_column="label", unlabeled_token="0", K=None, exclude=()):
    """Read a header-first CSV of numeric features plus an optional label column.

    ``label_column="none"`` treats every row as unlabeled.  Columns named in
    ``exclude`` (e.g. a held-out truth column) are skipped.  ``K`` defaults to
    the largest observed label (at least 2).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file; a header row is required", row=1) from None
        if label_column != "none" and label_column not in header:
            raise ParseError(f"label column {label_column!r} not in header", row=1)
        for name in exclude:
            if name not in header:
                raise ParseError(f"column {name!r} not in header", row=1)
        lab_pos = header.index(label_column) if label_column != "none" else -1
        skip = {header.index(name) for name in exclude}
        feat_pos = [j for j in range(len(header)) if j != lab_pos and j not in skip]
        rows, labels = [], []
        for r, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise InconsistentWidth(
                    f"expected {len(header)} fields, found {len(record)}", row=r
                )
            vals = []
            for j in feat_pos:
                try:
                    vals.append(float(record[j]))
                except ValueError:
                    raise ParseError(f"non-numeric value {record[j]!r}", r, header[j]) from None
            rows.append(vals)
            labels.append(_parse_label(record[lab_pos], unlabeled_token, r, header[lab_pos])
                          if lab_pos >= 0 else 0)
    if not rows:
        raise ParseError("no data rows")
    y = np.array(labels, dtype=np.int64)
    k_obs = int(y.max()) if y.size else 0
    if K is None:
        K = max(2, k_obs)
    elif k_obs > K:
        raise LabelOutOfRange(f"label {k_obs} exceeds K={K}")
    x = np.array(rows, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NotFinite("feature matrix contains NaN or Inf")
    return LabeledDataset(x, y, int(K), tuple(header[j] for j in feat_pos))


def load_column(path, name):
    """One integer column from a CSV (e.g. ground-truth labels for evaluation)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if name not in header:
            raise ParseError(f"column {name!r} not in header", row=1)
        j = header.index(name)
        out = []
        for r, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            out.append(_parse_label(record[j], "", r, name))
    return np.array(out, dtype=np.int64)


def to_csv(ds, path, label_column="label"):
    names = ds.feature_names or tuple(f"x{j + 1}" for j in range(ds.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [label_column])
        for row, lab in zip(ds.x, ds.y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def standardize(ds):
    """Centre and scale every column to sample variance 1 (n - 1 denominator).

    Returns ``(dataset, means, sds)``.
    """
    if ds.n < 2:
        raise DataError("standardisation needs at least two observations")
    mean = ds.x.mean(axis=0)
    sd = ds.x.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sd > 0))
    if bad.size:
        raise ZeroVarianceColumn(int(bad[0]))
    return ds.with_x((ds.x - mean) / sd, ds.feature_names), mean, sd


def drop_collinear(ds, tol=1e-10):
    """Greedily drop columns lying (within ``tol``) in the span of earlier kept ones.

    Returns ``(dataset, dropped_indices)``.  Note that with p > n at most n
    columns can survive.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    basis = np.empty((ds.n, 0))
    keep, dropped = [], []
    for j in range(ds.p):
        col = ds.x[:, j]
        norm = np.linalg.norm(col)
        r = col.copy()
        for _ in range(2):  # re-orthogonalise once for stability
            r -= basis @ (basis.T @ r)
        rn = np.linalg.norm(r)
        if norm == 0 or rn <= tol * norm:
            dropped.append(j)
            continue
        keep.append(j)
        basis = np.column_stack([basis, r / rn])
    names = None if ds.feature_names is None else tuple(ds.feature_names[j] for j in keep)
    return ds.with_x(ds.x[:, keep], names), dropped


def from_arrays(x, y=None, K=None):
    x = np.asarray(x, dtype=float)
    y = np.zeros(x.shape[0], dtype=np.int64) if y is None else np.asarray(y)
    if K is None:
        K = max(2, int(np.max(y)) if y.size else 2)
    return LabeledDataset(x, y, int(K))


def permute_columns(ds, perm: Sequence[int]):
    perm = np.asarray(perm)
    names = None if ds.feature_names is None else tuple(ds.feature_names[j] for j in perm)
    return ds.with_x(ds.x[:, perm], names)
