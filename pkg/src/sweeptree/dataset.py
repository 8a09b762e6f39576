"""Datasets: CSV ingestion, the XOR3 generator and cross-validation folds.

Class labels are stored 1-based (``1..C``) to match how results are
reported; internally the tree code works with ``labels - 1``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataError",
    "FeatureMeta",
    "Dataset",
    "FoldSplit",
    "load_csv",
    "write_csv",
    "generate_xor3",
    "make_folds",
]

MISSING_TOKENS = frozenset({"", "na", "nan", "null"})


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class FeatureMeta:
    """Per-feature metadata used by the split-rule priors.

    ``observed_values`` are the sorted distinct values seen in training data;
    their count is the number of candidate splitting rules for the feature.
    """

    index: int
    name: str
    kind: str  # "continuous" | "categorical"
    observed_values: np.ndarray
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        v = self.observed_values
        if v.ndim != 1 or v.size == 0:
            raise DataError(f"feature {self.name!r}: no observed values")
        if v.size > 1 and not np.all(np.diff(v) > 0):
            raise DataError(f"feature {self.name!r}: observed values not strictly increasing")

    @property
    def root_min(self) -> float:
        return float(self.observed_values[0])

    @property
    def root_max(self) -> float:
        return float(self.observed_values[-1])

    @property
    def root_range(self) -> float:
        return self.root_max - self.root_min

    @property
    def n_rules(self) -> int:
        return int(self.observed_values.size)


def _feature_meta(features: np.ndarray, names, kinds=None, categories=None) -> tuple[FeatureMeta, ...]:
    m = features.shape[1]
    kinds = kinds or ["continuous"] * m
    categories = categories or [()] * m
    return tuple(
        FeatureMeta(j, names[j], kinds[j], np.unique(features[:, j]), tuple(categories[j]))
        for j in range(m)
    )


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with 1-based integer class labels.

    Build with :func:`Dataset.from_arrays`, :func:`load_csv` or
    :func:`generate_xor3`; these compute ``meta`` from the features.
    """

    features: np.ndarray
    labels: np.ndarray
    meta: tuple[FeatureMeta, ...]
    n_classes: int
    class_names: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        X, y = self.features, self.labels
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError("features must be n x m and labels length n")
        if len(self.meta) != X.shape[1]:
            raise DataError("one FeatureMeta per column required")
        if y.size and (y.min() < 1 or y.max() > self.n_classes):
            raise DataError(f"labels must lie in 1..{self.n_classes}")
        X.setflags(write=False)
        y.setflags(write=False)

    @classmethod
    def from_arrays(
        cls,
        features,
        labels,
        n_classes: int | None = None,
        feature_names=None,
        class_names=(),
        name: str = "",
        kinds=None,
        categories=None,
    ) -> "Dataset":
        X = np.array(features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(labels, dtype=np.int64).copy()
        C = int(n_classes if n_classes is not None else y.max())
        names = list(feature_names) if feature_names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
        meta = _feature_meta(X, names, kinds, categories)
        return cls(X, y, meta, C, tuple(class_names), name)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def C(self) -> int:
        return self.n_classes

    @property
    def feature_names(self) -> list[str]:
        return [fm.name for fm in self.meta]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels - 1, minlength=self.n_classes)

    def subset(self, rows) -> "Dataset":
        """Rows ``rows`` as a new dataset; metadata is recomputed from them."""
        rows = np.asarray(rows)
        X = self.features[rows].copy()
        kinds = [fm.kind for fm in self.meta]
        cats = [fm.categories for fm in self.meta]
        return Dataset(
            X,
            self.labels[rows].copy(),
            _feature_meta(X, self.feature_names, kinds, cats),
            self.n_classes,
            self.class_names,
            self.name,
        )


@dataclass(frozen=True)
class FoldSplit:
    fold_count: int
    assignment: np.ndarray
    seed: int | None = None

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, test

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.fold_count)


def _parse_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path, label_column: str | int | None = None, name: str | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
        CSV with a header row.
    label_column : str or int, optional
        Header name or 0-based position of the class column; the last
        column when omitted.

    Labels are mapped to ``1..C`` in order of first appearance. Columns that
    do not parse as numbers are ordinally encoded by sorted distinct value.
    Empty / ``NA`` / ``nan`` cells are rejected.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise DataError(f"{path}: header and at least one data row required")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    width = len(header)
    for lineno, r in enumerate(body, start=2):
        if len(r) != width:
            raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")

    if label_column is None:
        li = width - 1
    elif isinstance(label_column, int):
        li = label_column if label_column >= 0 else width + label_column
    else:
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r}")
        li = header.index(label_column)

    raw_labels = [r[li].strip() for r in body]
    if any(lab.lower() in MISSING_TOKENS for lab in raw_labels):
        raise DataError(f"{path}: missing class label")
    class_names: list[str] = []
    lookup: dict[str, int] = {}
    for lab in raw_labels:
        if lab not in lookup:
            lookup[lab] = len(class_names) + 1
            class_names.append(lab)
    if len(class_names) < 2:
        raise DataError(f"{path}: fewer than 2 classes")
    labels = np.array([lookup[lab] for lab in raw_labels], dtype=np.int64)

    feat_cols = [j for j in range(width) if j != li]
    n = len(body)
    X = np.empty((n, len(feat_cols)))
    kinds, cats = [], []
    for out_j, j in enumerate(feat_cols):
        cells = [r[j].strip() for r in body]
        for i, c in enumerate(cells):
            if c.lower() in MISSING_TOKENS:
                raise DataError(f"{path}:{i + 2}: missing value in column {header[j]!r}")
        parsed = [_parse_float(c) for c in cells]
        if all(v is not None for v in parsed):
            X[:, out_j] = parsed
            kinds.append("continuous")
            cats.append(())
        else:
            levels = sorted(set(cells))
            code = {lev: float(i) for i, lev in enumerate(levels)}
            X[:, out_j] = [code[c] for c in cells]
            kinds.append("categorical")
            cats.append(tuple(levels))

    if X.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")
    if all(np.unique(X[:, j]).size == 1 for j in range(X.shape[1])):
        raise DataError(f"{path}: constant dataset (every feature single-valued)")
    names = [header[j] for j in feat_cols]
    return Dataset(
        X, labels, _feature_meta(X, names, kinds, cats), len(class_names),
        tuple(class_names), name if name is not None else path.stem,
    )


def write_csv(ds: Dataset, path, label_name: str = "class") -> None:
    """Write ``ds`` as CSV (features then label); floats are written with ``repr``.

    Categorical columns are written back as their original level strings and
    labels as class names when known, so :func:`load_csv` round-trips.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, label_name])
        for x, y in zip(ds.features, ds.labels):
            row = []
            for fm, v in zip(ds.meta, x):
                row.append(fm.categories[int(v)] if fm.categories else repr(float(v)))
            row.append(ds.class_names[y - 1] if ds.class_names else str(int(y)))
            w.writerow(row)


def xor3_label(x1, x2):
    """Class 1 where ``x1*x2 > 0``, else class 2 (a zero product goes to class 2)."""
    return np.where(np.asarray(x1) * np.asarray(x2) > 0, 1, 2)


def generate_xor3(n: int, seed=None, noise_sd: float = 0.2) -> Dataset:
    """Synthetic XOR3 problem.

    ``x1, x2 ~ U(-0.5, 0.5)`` carry the signal, ``x3 ~ N(0, noise_sd)`` is an
    irrelevant feature.
    """
    if n < 2:
        raise DataError("generate_xor3 needs n >= 2")
    rng = np.random.default_rng(seed)
    x12 = rng.uniform(-0.5, 0.5, size=(n, 2))
    x3 = rng.normal(0.0, noise_sd, size=n)
    X = np.column_stack([x12, x3])
    y = xor3_label(X[:, 0], X[:, 1])
    return Dataset.from_arrays(X, y, n_classes=2, feature_names=["x1", "x2", "x3"],
                               class_names=("1", "2"), name="xor3")


def make_folds(ds: Dataset, k: int, seed=None, stratify: bool = False) -> FoldSplit:
    """Assign rows to ``k`` folds of near-equal size.

    Rows are randomly permuted and dealt round-robin, so fold sizes differ by
    at most one. With ``stratify`` the permutation is grouped by class first,
    which spreads each class evenly across folds.
    """
    if not 2 <= k <= ds.n:
        raise DataError(f"fold count must be in [2, {ds.n}], got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n)
    if stratify:
        order = order[np.argsort(ds.labels[order], kind="stable")]
    assignment = np.empty(ds.n, dtype=np.int64)
    assignment[order] = np.arange(ds.n) % k
    return FoldSplit(k, assignment, seed)
