"""Tabular dataset container, CSV ingestion and the splitting/windowing primitives."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._rng import make_rng
from .errors import DegenerateError, DomainError, ParseError, SchemaError


def _frozen(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional target ``y`` and binary protected attribute ``z``."""

    x: np.ndarray
    feature_names: tuple[str, ...]
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise DomainError(f"x must be a matrix, got {x.ndim} dimensions")
        n, p = x.shape
        if not np.all(np.isfinite(x)):
            raise DomainError("x contains NaN or infinite values")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DomainError(f"{len(names)} feature names for {p} columns")
        if len(set(names)) != p:
            raise DomainError("feature names must be unique")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "feature_names", names)

        for attr in ("y", "z"):
            v = getattr(self, attr)
            if v is None:
                continue
            v = _frozen(np.ravel(v))
            if v.shape[0] != n:
                raise DomainError(f"{attr} has length {v.shape[0]}, expected {n}")
            if not np.all(np.isfinite(v)):
                raise DomainError(f"{attr} contains NaN or infinite values")
            object.__setattr__(self, attr, v)
        if self.z is not None and not np.all((self.z == 0) | (self.z == 1)):
            raise DomainError("protected attribute must take values in {0, 1}")

        ids = np.arange(n) if self.row_ids is None else np.asarray(self.row_ids)
        if ids.shape[0] != n:
            raise DomainError("row_ids length does not match x")
        ids = ids.copy()
        ids.setflags(write=False)
        object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.x[:, self.index_of(name)]

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def take(self, idx) -> "Dataset":
        """Row subset, preserving row ids."""
        idx = np.asarray(idx)
        return Dataset(
            x=self.x[idx],
            feature_names=self.feature_names,
            y=None if self.y is None else self.y[idx],
            z=None if self.z is None else self.z[idx],
            row_ids=self.row_ids[idx],
        )

    def select(self, names: Sequence[str]) -> "Dataset":
        cols = [self.index_of(s) for s in names]
        return Dataset(self.x[:, cols], tuple(names), self.y, self.z, self.row_ids)

    def drop(self, names: Sequence[str]) -> "Dataset":
        keep = [s for s in self.feature_names if s not in set(names)]
        return self.select(keep)

    def replace(self, **changes) -> "Dataset":
        fields = dict(x=self.x, feature_names=self.feature_names, y=self.y, z=self.z, row_ids=self.row_ids)
        fields.update(changes)
        return Dataset(**fields)

    def equals(self, other: "Dataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.feature_names == other.feature_names
            and same(self.x, other.x)
            and same(self.y, other.y)
            and same(self.z, other.z)
        )


@dataclass(frozen=True)
class StandardizationStats:
    mean: float
    std: float

    def apply(self, v) -> np.ndarray:
        if self.std == 0:
            raise DegenerateError("zero-variance series cannot be standardized")
        return (np.asarray(v, dtype=float) - self.mean) / self.std


def load_csv(path, target: Optional[str] = None, protected: Optional[str] = None) -> Dataset:
    """Read a header-first CSV; every remaining column must be numeric.

    Lines starting with ``#`` (provenance comments) are skipped.

    The protected column may hold any two distinct levels. Numeric levels map
    the smaller one to 0; other labels map in order of first appearance.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        rows = [r for r in reader if r]

    for name in (target, protected):
        if name is not None and name not in header:
            raise SchemaError(f"missing column {name!r}")

    def numeric_col(j: int, name: str) -> np.ndarray:
        out = np.empty(len(rows))
        for i, r in enumerate(rows):
            if len(r) != len(header):
                raise ParseError(f"row {i + 2}: expected {len(header)} cells, got {len(r)}")
            try:
                out[i] = float(r[j])
            except ValueError:
                raise ParseError(f"row {i + 2}, column {name!r}: non-numeric value {r[j]!r}") from None
            if not math.isfinite(out[i]):
                raise ParseError(f"row {i + 2}, column {name!r}: non-finite value {r[j]!r}")
        return out

    feature_names = [h for h in header if h not in (target, protected)]
    x = np.column_stack([numeric_col(header.index(h), h) for h in feature_names]) if feature_names else np.empty((len(rows), 0))
    y = numeric_col(header.index(target), target) if target else None
    z = None
    if protected:
        j = header.index(protected)
        raw = [r[j].strip() for r in rows]
        levels = list(dict.fromkeys(raw))
        if len(levels) > 2:
            raise DomainError(f"protected column {protected!r} has {len(levels)} levels, expected 2")
        try:
            levels = sorted(levels, key=float)
        except ValueError:
            pass
        z = np.array([levels.index(v) for v in raw], dtype=float)
    return Dataset(x=x, feature_names=tuple(feature_names), y=y, z=z)


def write_csv(d: Dataset, path, target: str = "y", protected: str = "z", comment: Optional[str] = None) -> None:
    """Write ``d`` with 17 significant digits so :func:`load_csv` reproduces it exactly.

    ``comment`` becomes a leading ``#`` line.
    """
    header = list(d.feature_names)
    cols = [d.x[:, j] for j in range(d.p)]
    if d.y is not None:
        header.append(target)
        cols.append(d.y)
    if d.z is not None:
        header.append(protected)
        cols.append(d.z)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(d.n):
            w.writerow([format(float(c[i]), ".17g") for c in cols])
    tmp.replace(path)


def split_three_way(d: Dataset, fractions=(1 / 3, 1 / 3, 1 / 3), seed: int = 0):
    """Shuffle rows by ``seed`` and cut them into three disjoint parts.

    Part sizes are ``floor(f_k * n)`` with the leftover rows handed out one at a
    time, largest fractional remainder first.
    """
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or np.any(f < 0) or abs(f.sum() - 1.0) > 1e-9:
        raise DomainError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    if d.n < 3:
        raise DomainError("need at least 3 rows to split")
    raw = f * d.n
    sizes = np.floor(raw + 1e-9).astype(int)
    remainder = raw - sizes
    for k in np.argsort(-remainder, kind="stable")[: d.n - sizes.sum()]:
        sizes[k] += 1
    perm = make_rng(seed).permutation(d.n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return d.take(np.sort(perm[:a])), d.take(np.sort(perm[a:b])), d.take(np.sort(perm[b:]))


def sorted_third_split(d: Dataset, feature: str):
    """Sort by ``feature`` (stable) and cut into lower/middle/upper thirds.

    The middle section is the one a model gets trained on.
    """
    j = d.index_of(feature)
    if d.y is None:
        raise DomainError("sorted_third_split needs a target")
    if d.n < 3:
        raise DomainError("need at least 3 rows to split")
    order = np.argsort(d.x[:, j], kind="stable")
    c1, c2 = third_cuts(d.n)
    return d.take(order[:c1]), d.take(order[c1:c2]), d.take(order[c2:])


def third_cuts(n: int) -> tuple[int, int]:
    # remainder rows go to the earlier sections
    base, extra = divmod(n, 3)
    c1 = base + (1 if extra > 0 else 0)
    c2 = c1 + base + (1 if extra > 1 else 0)
    return c1, c2


def rolling_windows(d_or_n, size: int, stride: int = 1) -> list[np.ndarray]:
    n = d_or_n.n if isinstance(d_or_n, Dataset) else int(d_or_n)
    if size < 1 or stride < 1:
        raise DomainError("window size and stride must be >= 1")
    if size > n:
        raise DomainError(f"window size {size} exceeds {n} rows")
    count = (n - size) // stride + 1
    return [np.arange(k * stride, k * stride + size) for k in range(count)]


def standardize_series(v) -> tuple[np.ndarray, StandardizationStats]:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise DomainError("need a vector with at least two values")
    mean = float(v.mean())
    std = float(v.std())
    if std <= 1e-12 * max(1.0, abs(mean)):
        raise DegenerateError("zero-variance series: monitoring comparison undefined")
    stats = StandardizationStats(mean, std)
    return stats.apply(v), stats
