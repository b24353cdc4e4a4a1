"""Tabular datasets, schema files, empirical CDFs and missingness injection."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

KINDS = ("continuous", "integer", "binary")
ACTIONABILITY = ("free", "immutable", "increase-only", "decrease-only")
MISSING_TOKENS = ("", "NA")


class SchemaError(ValueError):
    """Raised when a file does not match the declared feature schema."""


class BoundsError(ValueError):
    """Raised when a value falls outside its feature's declared domain."""


@dataclass(frozen=True)
class QuantileTable:
    """Rank-smoothed empirical CDF over a feature domain.

    Knots are sorted sample values with levels ``(#{samples <= v} + 0.5) / (n + 1)``;
    the CDF is linearly interpolated between knots and pinned to the
    smoothing floor/ceiling at the domain ends, so ``0 < Q < 1`` everywhere.
    """

    knots: tuple
    levels: tuple
    lower: float
    upper: float
    n: int

    def __call__(self, value):
        xs = [self.lower, *self.knots, self.upper]
        ys = [0.5 / (self.n + 1), *self.levels, (self.n + 0.5) / (self.n + 1)]
        # drop duplicated end points (samples sitting on the bounds)
        if xs[1] == xs[0]:
            xs, ys = xs[1:], ys[1:]
        if xs[-2] == xs[-1]:
            xs, ys = xs[:-1], ys[:-1]
        return np.interp(value, xs, ys)


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: str = "continuous"
    lower: float = 0.0
    upper: float = 1.0
    actionable: str = "free"
    quantiles: Optional[QuantileTable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.actionable not in ACTIONABILITY:
            raise SchemaError(f"{self.name}: unknown actionability {self.actionable!r}")
        if not self.lower < self.upper:
            raise SchemaError(f"{self.name}: lower must be < upper")
        if self.kind == "integer" and not (float(self.lower).is_integer() and float(self.upper).is_integer()):
            raise SchemaError(f"{self.name}: integer bounds must be integral")
        if self.kind == "binary" and (self.lower, self.upper) != (0, 1):
            raise SchemaError(f"{self.name}: binary features have bounds (0, 1)")

    def with_quantiles(self, table: QuantileTable) -> "FeatureMeta":
        return FeatureMeta(self.name, self.kind, self.lower, self.upper, self.actionable, table)


@dataclass(frozen=True)
class Dataset:
    features: tuple
    rows: np.ndarray
    labels: np.ndarray
    label_name: str = "label"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if rows.ndim != 2 or rows.shape[1] != len(self.features):
            raise SchemaError("rows must be a matrix with one column per feature")
        if len(rows) != len(labels):
            raise SchemaError("rows and labels must have equal length")
        if not np.all(np.isin(labels, (-1, 1))):
            raise SchemaError("labels must be in {-1, +1}")
        lo = np.array([f.lower for f in self.features])
        hi = np.array([f.upper for f in self.features])
        bad = (rows < lo) | (rows > hi)
        if bad.any():
            i, d = np.argwhere(bad)[0]
            raise BoundsError(
                f"row {i}: {self.features[d].name}={rows[i, d]!r} outside [{lo[d]}, {hi[d]}]"
            )
        rows.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.rows)

    @property
    def names(self):
        return [f.name for f in self.features]

    @property
    def lower(self):
        return np.array([f.lower for f in self.features])

    @property
    def upper(self):
        return np.array([f.upper for f in self.features])

    def subset(self, index) -> "Dataset":
        return Dataset(self.features, self.rows[index], self.labels[index], self.label_name)

    def with_features(self, features) -> "Dataset":
        return Dataset(tuple(features), self.rows, self.labels, self.label_name)


@dataclass(frozen=True)
class IncompleteInstance:
    """A feature vector where missing entries are NaN."""

    values: np.ndarray
    missing_set: tuple = field(init=False)
    observed_set: tuple = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        miss = np.isnan(values)
        object.__setattr__(self, "missing_set", tuple(int(d) for d in np.flatnonzero(miss)))
        object.__setattr__(self, "observed_set", tuple(int(d) for d in np.flatnonzero(~miss)))

    @classmethod
    def from_complete(cls, x, missing=()) -> "IncompleteInstance":
        v = np.array(x, dtype=float)
        v[list(missing)] = np.nan
        return cls(v)

    def __len__(self):
        return len(self.values)

    @property
    def missing_mask(self):
        return np.isnan(self.values)

    @property
    def is_complete(self):
        return not self.missing_set


# ---------------------------------------------------------------------------
# schema files

def parse_schema(text: str):
    """Parse a schema file.

    One entry per line::

        label_column = approved
        feature.age = integer, 18, 90, immutable
        feature.income = continuous, 0, 200, free

    Blank lines and lines starting with ``#`` are ignored. Feature order is
    the order of appearance.
    """
    features, label = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"schema line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "label_column":
            label = value
        elif key.startswith("feature."):
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 4:
                raise SchemaError(f"schema line {lineno}: expected kind, lower, upper, actionability")
            kind, lo, hi, act = parts
            try:
                lo, hi = float(lo), float(hi)
            except ValueError as exc:
                raise SchemaError(f"schema line {lineno}: bad bound") from exc
            features.append(FeatureMeta(key[len("feature."):], kind, lo, hi, act))
        else:
            raise SchemaError(f"schema line {lineno}: unknown key {key!r}")
    if not features:
        raise SchemaError("schema declares no features")
    return features, label


def load_schema(path):
    with open(path) as fh:
        return parse_schema(fh.read())


def format_schema(features, label_column=None) -> str:
    lines = []
    if label_column is not None:
        lines.append(f"label_column = {label_column}")
    for f in features:
        lines.append(f"feature.{f.name} = {f.kind}, {f.lower!r}, {f.upper!r}, {f.actionable}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV

def _parse_cell(cell, where):
    cell = cell.strip()
    if cell in MISSING_TOKENS:
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise SchemaError(f"{where}: malformed number {cell!r}") from None


def load_csv(path, schema: Sequence[FeatureMeta], label_column: str,
             positive_label=None) -> Dataset:
    """Read a labelled CSV whose header names every schema feature.

    The label column must take exactly two distinct values. ``positive_label``
    picks which one maps to +1; by default the larger (numeric) or the
    lexicographically larger value does.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        names = [f.name for f in schema]
        known = set(names) | {label_column}
        unknown = [h for h in header if h not in known]
        if unknown:
            raise SchemaError(f"{path}: unknown column(s) {unknown}")
        missing_cols = [n for n in names + [label_column] if n not in header]
        if missing_cols:
            raise SchemaError(f"{path}: missing column(s) {missing_cols}")
        col = [header.index(n) for n in names]
        lab = header.index(label_column)
        rows, raw_labels = [], []
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            rows.append([_parse_cell(rec[c], f"{path}:{lineno}") for c in col])
            raw_labels.append(rec[lab].strip())
    values = sorted(set(raw_labels), key=_label_key)
    if len(values) != 2:
        raise SchemaError(f"{path}: label column must take two distinct values, found {len(values)}")
    pos = values[1] if positive_label is None else str(positive_label)
    if pos not in values:
        raise SchemaError(f"{path}: positive label {pos!r} not present")
    rows = np.array(rows, dtype=float).reshape(-1, len(schema))
    if np.isnan(rows).any():
        raise SchemaError(f"{path}: training data must be complete")
    labels = np.where(np.array(raw_labels) == pos, 1, -1)
    return Dataset(tuple(schema), rows, labels, label_column)


def _label_key(v):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def write_csv(dataset: Dataset, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.names + [dataset.label_name])
        for row, y in zip(dataset.rows, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [int(y)])


def load_instance(path, schema: Sequence[FeatureMeta]) -> IncompleteInstance:
    """Read a single instance (header + one row); empty cells or NA are missing."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rec = next(reader)
    names = [f.name for f in schema]
    unknown = [h for h in header if h not in names]
    if unknown:
        raise SchemaError(f"{path}: unknown column(s) {unknown}")
    values = np.full(len(names), math.nan)
    for h, cell in zip(header, rec):
        values[names.index(h)] = _parse_cell(cell, path)
    for d, f in enumerate(schema):
        v = values[d]
        if not math.isnan(v) and not f.lower <= v <= f.upper:
            raise BoundsError(f"{path}: {f.name}={v!r} outside [{f.lower}, {f.upper}]")
    return IncompleteInstance(values)


def write_instance(x: IncompleteInstance, schema, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in schema])
        w.writerow(["NA" if math.isnan(v) else repr(float(v)) for v in x.values])


# ---------------------------------------------------------------------------
# quantiles and splitting

def fit_quantiles(dataset: Dataset, feature: int, resolution: int = 200) -> QuantileTable:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    col = np.sort(dataset.rows[:, feature])
    if col[0] == col[-1]:
        raise ValueError(f"feature {dataset.features[feature].name!r} is constant")
    n = len(col)
    uniq = np.unique(col)
    if len(uniq) > resolution:
        idx = np.unique(np.round(np.linspace(0, len(uniq) - 1, resolution)).astype(int))
        uniq = uniq[idx]
    levels = (np.searchsorted(col, uniq, side="right") + 0.5) / (n + 1)
    meta = dataset.features[feature]
    return QuantileTable(tuple(uniq.tolist()), tuple(levels.tolist()),
                         float(meta.lower), float(meta.upper), n)


def attach_quantiles(dataset: Dataset, resolution: int = 200):
    """Return feature metadata with quantile tables fitted on ``dataset``."""
    out = []
    for d, f in enumerate(dataset.features):
        try:
            out.append(f.with_quantiles(fit_quantiles(dataset, d, resolution)))
        except ValueError:
            out.append(f)
    return tuple(out)


def split(dataset: Dataset, test_fraction: float = 0.25, seed: int = 0):
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise ValueError("split would leave an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return dataset.subset(train), dataset.subset(test)


# ---------------------------------------------------------------------------
# missingness mechanisms

@dataclass(frozen=True)
class MCAR:
    n_missing: int


@dataclass(frozen=True)
class MAR:
    target: int
    cond: int
    threshold: float


@dataclass(frozen=True)
class MNAR:
    target: int
    threshold: float


Mechanism = Union[MCAR, MAR, MNAR]


def inject_missing(x, mechanism: Mechanism, seed=0) -> IncompleteInstance:
    x = np.asarray(x, dtype=float)
    D = len(x)
    if isinstance(mechanism, MCAR):
        k = mechanism.n_missing
        if not 1 <= k < D:
            raise ValueError(f"MCAR needs 1 <= D* < D (got D*={k}, D={D})")
        drop = np.random.default_rng(seed).choice(D, size=k, replace=False)
    elif isinstance(mechanism, MAR):
        if mechanism.target == mechanism.cond:
            raise ValueError("MAR target and conditioning feature must differ")
        drop = [mechanism.target] if x[mechanism.cond] > mechanism.threshold else []
    elif isinstance(mechanism, MNAR):
        drop = [mechanism.target] if x[mechanism.target] > mechanism.threshold else []
    else:
        raise TypeError(f"unknown mechanism {mechanism!r}")
    return IncompleteInstance.from_complete(x, drop)


def median_threshold(dataset: Dataset, feature: int) -> float:
    return float(np.median(dataset.rows[:, feature]))


def meta_to_dict(meta: FeatureMeta) -> dict:
    doc = {"name": meta.name, "kind": meta.kind, "lower": repr(float(meta.lower)),
           "upper": repr(float(meta.upper)), "actionable": meta.actionable}
    q = meta.quantiles
    if q is not None:
        doc["quantiles"] = {"knots": [repr(float(v)) for v in q.knots],
                            "levels": [repr(float(v)) for v in q.levels], "n": q.n}
    return doc


def meta_from_dict(doc) -> FeatureMeta:
    try:
        lo, hi = float(doc["lower"]), float(doc["upper"])
        table = None
        if doc.get("quantiles") is not None:
            q = doc["quantiles"]
            table = QuantileTable(tuple(float(v) for v in q["knots"]), tuple(float(v) for v in q["levels"]),
                                  lo, hi, int(q["n"]))
        return FeatureMeta(doc["name"], doc["kind"], lo, hi, doc["actionable"], table)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed feature entry: {exc}") from exc
