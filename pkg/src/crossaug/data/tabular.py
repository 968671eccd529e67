"""Tabular datasets: CSV loading, union schemas, one-hot + min-max encoding."""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

NUMERICAL = "numerical"
CATEGORICAL = "categorical"

SURVIVAL_COLUMN = re.compile(r"surviv.*month", re.IGNORECASE)
SURVIVAL_MONTHS = 24


class ParseError(ValueError):
    pass


class AlignmentError(ValueError):
    pass


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    min: float | None = None
    max: float | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind == NUMERICAL:
            if self.min is None or self.max is None or self.min > self.max:
                raise ValueError(f"{self.name}: numerical feature needs min <= max")
        elif self.kind == CATEGORICAL:
            if not self.categories:
                raise ValueError(f"{self.name}: categorical feature needs categories")
            if len(set(self.categories)) != len(self.categories):
                raise ValueError(f"{self.name}: duplicate categories")
        else:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")

    @property
    def width(self) -> int:
        return 1 if self.kind == NUMERICAL else len(self.categories)

    def column_names(self) -> list[str]:
        if self.kind == NUMERICAL:
            return [self.name]
        return [f"{self.name}={c}" for c in self.categories]


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def width(self) -> int:
        return sum(f.width for f in self.features)

    def column_names(self) -> list[str]:
        return [c for f in self.features for c in f.column_names()]

    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for f in self.features:
            out[f.name] = slice(start, start + f.width)
            start += f.width
        return out

    def __getitem__(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def to_dict(self) -> list[dict]:
        out = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.kind == NUMERICAL:
                d.update(min=f.min, max=f.max)
            else:
                d["categories"] = list(f.categories)
            out.append(d)
        return out

    @classmethod
    def from_dict(cls, items) -> "FeatureSchema":
        feats = []
        for d in items:
            cats = tuple(d["categories"]) if "categories" in d else None
            feats.append(Feature(d["name"], d["kind"], d.get("min"), d.get("max"), cats))
        return cls(tuple(feats))


@dataclass
class Dataset:
    """Column-oriented table with labels and row provenance ids.

    Numerical columns are float arrays (NaN = missing); categorical columns
    are object arrays of str (None = missing). ``encoded`` is filled by
    :func:`encode`. ``ids`` are unique within ``origin``; subsets keep both.
    """

    name: str
    columns: dict[str, np.ndarray]
    kinds: dict[str, str]
    labels: np.ndarray
    ids: np.ndarray = None
    schema: FeatureSchema | None = None
    encoded: np.ndarray | None = None
    label_missing: np.ndarray | None = field(default=None, repr=False)
    origin: str | None = None

    def __post_init__(self):
        n = len(self.labels)
        if self.ids is None:
            self.ids = np.arange(n)
        if self.origin is None:
            self.origin = self.name
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"column {name} has {len(col)} rows, labels have {n}")

    def __len__(self):
        return len(self.labels)

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)

    def missing_mask(self) -> np.ndarray:
        mask = np.zeros(len(self), dtype=bool)
        for name, col in self.columns.items():
            if self.kinds[name] == NUMERICAL:
                mask |= np.isnan(col.astype(np.float64))
            else:
                mask |= np.array([v is None for v in col], dtype=bool)
        if self.label_missing is not None:
            mask |= self.label_missing
        return mask

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            columns={k: v[idx] for k, v in self.columns.items()},
            labels=self.labels[idx],
            ids=self.ids[idx],
            encoded=None if self.encoded is None else self.encoded[idx],
            label_missing=None if self.label_missing is None else self.label_missing[idx],
        )


def _parse_float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def load_tabular(path, label_column: str, name: str | None = None,
                 survival_threshold: float | None = None) -> Dataset:
    """Read a comma-separated file with a header row; empty cells are missing.

    A column is numerical when every non-missing cell parses as a number.
    If the label column looks like a survival-months column (or
    ``survival_threshold`` is given) the label is 1 iff months >= threshold.
    Other numeric labels must be integers; string labels are indexed in
    sorted order.
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: line 1: missing header row") from None
        header = [h.strip() for h in header]
        if not any(header):
            raise ParseError(f"{path}: line 1: empty header row")
        if label_column not in header:
            raise ParseError(f"{path}: line 1: label column {label_column!r} not in header")
        raw = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}")
            raw.append([c.strip() for c in row])

    cells = {h: [r[j] for r in raw] for j, h in enumerate(header)}
    labels, label_missing = _labels(cells.pop(label_column), label_column, survival_threshold)
    columns, kinds = {}, {}
    for h, vals in cells.items():
        present = [v for v in vals if v != ""]
        if all(_parse_float(v) is not None for v in present):
            kinds[h] = NUMERICAL
            columns[h] = np.array([float(v) if v != "" else np.nan for v in vals], dtype=np.float64)
        else:
            kinds[h] = CATEGORICAL
            columns[h] = np.array([v if v != "" else None for v in vals], dtype=object)
    name = name or str(path)
    return Dataset(name, columns, kinds, labels, label_missing=label_missing)


def _labels(vals, column, survival_threshold):
    missing = np.array([v == "" for v in vals], dtype=bool)
    present = [v for v in vals if v != ""]
    numeric = all(_parse_float(v) is not None for v in present)
    if survival_threshold is None and SURVIVAL_COLUMN.search(column) and numeric:
        survival_threshold = SURVIVAL_MONTHS
    if survival_threshold is not None:
        if not numeric:
            raise ParseError(f"survival column {column!r} must be numeric")
        return survival_labels([float(v) if v != "" else np.nan for v in vals],
                               survival_threshold), missing
    if numeric:
        nums = [float(v) for v in present]
        if any(x != int(x) or x < 0 for x in nums):
            raise ParseError(f"label column {column!r} must hold non-negative integers")
        return np.array([int(float(v)) if v != "" else -1 for v in vals], dtype=np.int64), missing
    classes = sorted(set(present))
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index.get(v, -1) for v in vals], dtype=np.int64), missing


def survival_labels(months, threshold: float = SURVIVAL_MONTHS) -> np.ndarray:
    """1 for patients surviving ``threshold`` months or longer, else 0 (-1 if missing)."""
    m = np.asarray(months, dtype=np.float64)
    out = (m >= threshold).astype(np.int64)
    out[np.isnan(m)] = -1
    return out


def drop_missing(ds: Dataset) -> Dataset:
    mask = ds.missing_mask()
    kept = ds.take(np.flatnonzero(~mask))
    if len(ds) and not len(kept):
        log.warning("%s: every row has a missing cell; 0 rows remain", ds.name)
    kept.label_missing = None
    return kept


@dataclass
class AlignedPair:
    a: Dataset
    b: Dataset
    common: list[str]
    common_in_a: list[int]
    common_in_b: list[int]
    unique_in_a: list[int]
    unique_in_b: list[int]

    def swapped(self) -> "AlignedPair":
        return AlignedPair(self.b, self.a, self.common, self.common_in_b, self.common_in_a,
                           self.unique_in_b, self.unique_in_a)


def _present(col, kind):
    if kind == NUMERICAL:
        c = np.asarray(col, dtype=np.float64)
        return c[~np.isnan(c)]
    return [v for v in col if v is not None]


def _fit_feature(name, kind, values, categories=None, value_range=None) -> Feature:
    if kind == NUMERICAL:
        if value_range is not None:
            lo, hi = value_range
        elif len(values):
            lo, hi = float(np.min(values)), float(np.max(values))
        else:
            lo = hi = 0.0
        return Feature(name, NUMERICAL, float(lo), float(hi))
    seen = sorted(set(values))
    if categories is not None:
        unknown = [v for v in seen if v not in categories]
        if unknown:
            raise AlignmentError(f"{name}: values {unknown} not in declared categories")
        cats = tuple(categories)
    else:
        cats = tuple(seen)
    if not cats:
        raise AlignmentError(f"{name}: categorical feature has no observed values")
    return Feature(name, CATEGORICAL, categories=cats)


def fit_union_schema(ds_a: Dataset, ds_b: Dataset, common: list[str],
                     categories: dict | None = None, ranges: dict | None = None):
    """Fit per-dataset schemas and encode both into an :class:`AlignedPair`.

    Common features are fit on the union of both datasets' rows, so a given
    value encodes identically on either side. Dataset-unique features are
    fit on their own dataset. ``categories`` and ``ranges`` pin category
    order or numeric ranges per feature name.
    """
    categories = categories or {}
    ranges = ranges or {}
    for name in common:
        for ds in (ds_a, ds_b):
            if name not in ds.columns:
                raise AlignmentError(f"common feature {name!r} missing from dataset {ds.name}")
        if ds_a.kinds[name] != ds_b.kinds[name]:
            raise AlignmentError(
                f"common feature {name!r} is {ds_a.kinds[name]} in {ds_a.name} "
                f"but {ds_b.kinds[name]} in {ds_b.name}"
            )
    shared = {}
    for name in common:
        kind = ds_a.kinds[name]
        va, vb = _present(ds_a.columns[name], kind), _present(ds_b.columns[name], kind)
        union = np.concatenate([va, vb]) if kind == NUMERICAL else list(va) + list(vb)
        shared[name] = _fit_feature(name, kind, union, categories.get(name), ranges.get(name))

    def schema_for(ds):
        feats = []
        for name in ds.columns:
            if name in shared:
                feats.append(shared[name])
            else:
                kind = ds.kinds[name]
                feats.append(_fit_feature(name, kind, _present(ds.columns[name], kind),
                                          categories.get(name), ranges.get(name)))
        return FeatureSchema(tuple(feats))

    schema_a, schema_b = schema_for(ds_a), schema_for(ds_b)
    enc_a, enc_b = encode(ds_a, schema_a), encode(ds_b, schema_b)
    return schema_a, schema_b, align(enc_a, enc_b, common)


def align(enc_a: Dataset, enc_b: Dataset, common: list[str]) -> AlignedPair:
    """Column index bookkeeping for two encoded datasets sharing ``common``."""
    sa, sb = enc_a.schema.slices(), enc_b.schema.slices()
    ca, cb = [], []
    for name in common:
        if enc_a.schema[name] != enc_b.schema[name]:
            raise AlignmentError(f"common feature {name!r} has different schemas on each side")
        ca += list(range(sa[name].start, sa[name].stop))
        cb += list(range(sb[name].start, sb[name].stop))
    sca, scb = set(ca), set(cb)
    ua = [i for i in range(enc_a.schema.width) if i not in sca]
    ub = [i for i in range(enc_b.schema.width) if i not in scb]
    return AlignedPair(enc_a, enc_b, list(common), ca, cb, ua, ub)


def encode(ds: Dataset, schema: FeatureSchema) -> Dataset:
    """One-hot categorical features, min-max numerical ones (clamped to [0, 1])."""
    n = len(ds)
    out = np.zeros((n, schema.width))
    if ds.missing_mask().any():
        raise EncodingError(f"{ds.name}: drop missing values before encoding")
    for feat, sl in zip(schema.features, schema.slices().values()):
        if feat.name not in ds.columns:
            raise EncodingError(f"{ds.name}: no column {feat.name!r}")
        col = ds.columns[feat.name]
        if feat.kind == NUMERICAL:
            span = feat.max - feat.min
            if span == 0:
                continue
            out[:, sl.start] = np.clip((col.astype(np.float64) - feat.min) / span, 0.0, 1.0)
        else:
            index = {c: i for i, c in enumerate(feat.categories)}
            try:
                pos = np.array([index[v] for v in col], dtype=np.int64)
            except KeyError as exc:
                raise EncodingError(
                    f"{ds.name}: {feat.name} value {exc.args[0]!r} not in schema; refit the schema"
                ) from None
            out[np.arange(n), sl.start + pos] = 1.0
    return replace(ds, schema=schema, encoded=out)


def decode(schema: FeatureSchema, encoded) -> dict[str, np.ndarray]:
    """Inverse transform: numeric columns via inverse min-max, one-hot via argmax."""
    m = np.asarray(encoded, dtype=np.float64)
    out = {}
    for feat, sl in zip(schema.features, schema.slices().values()):
        if feat.kind == NUMERICAL:
            out[feat.name] = feat.min + m[:, sl.start] * (feat.max - feat.min)
        else:
            cats = np.array(feat.categories, dtype=object)
            out[feat.name] = cats[np.argmax(m[:, sl], axis=1)]
    return out


def write_tabular(path, ds: Dataset, label_column: str = "label") -> None:
    """Write the raw (unencoded) table as CSV with the label last."""
    names = list(ds.columns)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(names + [label_column])
        for i in range(len(ds)):
            row = []
            for name in names:
                v = ds.columns[name][i]
                if ds.kinds[name] == NUMERICAL:
                    row.append("" if np.isnan(v) else repr(float(v)))
                else:
                    row.append("" if v is None else v)
            row.append(int(ds.labels[i]))
            w.writerow(row)
