"""Tabular dataset container, CSV ingestion and min-max normalization."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_POSITIVE_TOKENS = ("1", "anomaly")


class DataError(ValueError):
    """Raised for malformed or unsupported input data."""


class Kind(str, enum.Enum):
    NUMERIC = "numeric"
    NOMINAL = "nominal"


@dataclass(frozen=True)
class AttributeMeta:
    name: str
    kind: Kind
    index: int
    categories: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is Kind.NOMINAL and not self.categories:
            raise DataError(f"nominal attribute {self.name!r} has no categories")

    @property
    def is_nominal(self) -> bool:
        return self.kind is Kind.NOMINAL

    def format_value(self, value: float) -> str:
        if self.is_nominal:
            code = int(value)
            return self.categories[code] if 0 <= code < len(self.categories) else f"<unseen:{code}>"
        return repr(float(value))


@dataclass(frozen=True)
class Dataset:
    """An immutable N x M table.

    Numeric cells hold finite reals, nominal cells hold the category index as
    a float. ``labels`` (1 = anomaly) is only consumed by evaluation code.
    """

    attributes: tuple[AttributeMeta, ...]
    values: np.ndarray
    labels: np.ndarray | None = None
    label_name: str = "label"

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        n, m = values.shape
        if n < 1:
            raise DataError("dataset has no instances")
        if m < 2:
            raise DataError("dataset needs at least 2 attributes")
        if m != len(self.attributes):
            raise DataError(f"{m} columns but {len(self.attributes)} attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise DataError("attribute names must be unique")
        if not np.all(np.isfinite(values)):
            raise DataError("dataset contains non-finite cells")
        for a in self.attributes:
            if a.is_nominal:
                col = values[:, a.index]
                if np.any(col < 0) or np.any(col >= len(a.categories)) or np.any(col != np.round(col)):
                    raise DataError(f"invalid category index in attribute {a.name!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int8).copy()
            if labels.shape != (n,):
                raise DataError(f"labels must have length {n}")
            if not np.isin(labels, (0, 1)).all():
                raise DataError("labels must be 0 (normal) or 1 (anomaly)")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def nominal_mask(self) -> np.ndarray:
        return np.array([a.is_nominal for a in self.attributes])

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def attribute(self, name: str) -> AttributeMeta:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def with_values(self, values: np.ndarray, attributes: Sequence[AttributeMeta] | None = None) -> "Dataset":
        return Dataset(
            attributes=tuple(attributes) if attributes is not None else self.attributes,
            values=values,
            labels=self.labels,
            label_name=self.label_name,
        )


def _is_missing(token: str) -> bool:
    t = token.strip()
    if not t:
        return True
    try:
        return math.isnan(float(t))
    except ValueError:
        return False


def _parse_finite(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def read_schema(path: str | Path) -> dict[str, Kind]:
    """Parse a ``name=numeric|nominal`` override file (``#`` starts a comment)."""
    schema: dict[str, Kind] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, kind = line.partition("=")
        if not sep:
            raise DataError(f"schema line {lineno}: expected name=numeric|nominal")
        try:
            schema[name.strip()] = Kind(kind.strip().lower())
        except ValueError:
            raise DataError(f"schema line {lineno}: unknown kind {kind.strip()!r}") from None
    return schema


def load_csv(
    path: str | Path,
    label_column: str | None = None,
    positive_tokens: Iterable[str] = DEFAULT_POSITIVE_TOKENS,
    schema: dict[str, Kind] | None = None,
) -> Dataset:
    """Read a headed, comma-separated file into a :class:`Dataset`.

    A column is numeric when every cell parses as a finite real, otherwise it
    is nominal with categories in order of first appearance. ``schema`` can
    force a kind per column name.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            if _is_missing(cell):
                raise DataError(f"{path}: missing value at row {i}, column {header[j]!r}")

    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema names unknown columns: {sorted(unknown)}")

    labels = None
    if label_column is not None:
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not found")
        li = header.index(label_column)
        positives = {t.strip().lower() for t in positive_tokens}
        labels = np.array([1 if r[li].strip().lower() in positives else 0 for r in body], dtype=np.int8)

    attrs: list[AttributeMeta] = []
    cols: list[np.ndarray] = []
    for j, name in enumerate(header):
        if name == label_column:
            continue
        tokens = [r[j].strip() for r in body]
        parsed = [_parse_finite(t) for t in tokens]
        forced = schema.get(name)
        numeric = all(p is not None for p in parsed)
        if forced is Kind.NUMERIC and not numeric:
            bad = next(i for i, p in enumerate(parsed) if p is None)
            raise DataError(f"{path}: column {name!r} forced numeric but row {bad + 2} is {tokens[bad]!r}")
        if forced is Kind.NOMINAL:
            numeric = False
        idx = len(attrs)
        if numeric:
            attrs.append(AttributeMeta(name, Kind.NUMERIC, idx))
            cols.append(np.array(parsed, dtype=np.float64))
        else:
            cats: dict[str, int] = {}
            codes = [cats.setdefault(t, len(cats)) for t in tokens]
            attrs.append(AttributeMeta(name, Kind.NOMINAL, idx, tuple(cats)))
            cols.append(np.array(codes, dtype=np.float64))
    if len(attrs) < 2:
        raise DataError(f"{path}: need at least 2 attributes, found {len(attrs)}")
    return Dataset(tuple(attrs), np.column_stack(cols), labels, label_name=label_column or "label")


def save_csv(d: Dataset, path: str | Path, label_name: str | None = None) -> None:
    """Write ``d`` so that :func:`load_csv` reads back the same table.

    Numeric cells use ``repr`` (shortest round-tripping text); labels, if
    present, go in a trailing column as 0/1.
    """
    label_name = label_name or d.label_name
    header = d.names
    if d.labels is not None:
        if label_name in header:
            raise DataError(f"label column name {label_name!r} clashes with an attribute")
        header = header + [label_name]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n_instances):
            row = [a.format_value(d.values[i, a.index]) for a in d.attributes]
            if d.labels is not None:
                row.append(str(int(d.labels[i])))
            w.writerow(row)


def normalize_minmax(d: Dataset) -> Dataset:
    """Map every numeric column affinely onto [0, 1]; constant columns become 0."""
    values = d.values.copy()
    for a in d.attributes:
        if a.is_nominal:
            continue
        col = values[:, a.index]
        lo, hi = col.min(), col.max()
        values[:, a.index] = 0.0 if hi == lo else (col - lo) / (hi - lo)
    return d.with_values(values)
