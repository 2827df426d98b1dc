"""Summary of the reference data that attributions are measured against."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

MAX_BACKGROUND_ROWS = 1000


@dataclass(frozen=True)
class BackgroundStats:
    means: np.ndarray
    covariance: np.ndarray
    rows: Optional[np.ndarray] = None

    def __post_init__(self):
        means = np.atleast_1d(np.asarray(self.means, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float)).copy()
        p = means.size
        if cov.shape != (p, p):
            raise DomainError(f"covariance shape {cov.shape} does not match {p} means")
        if not np.allclose(cov, cov.T, atol=1e-10, rtol=0):
            raise DomainError("covariance must be symmetric")
        if np.any(np.diag(cov) < 0):
            raise DomainError("covariance diagonal must be non-negative")
        means.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariance", cov)
        if self.rows is not None:
            rows = np.atleast_2d(np.asarray(self.rows, dtype=float)).copy()
            if rows.shape[1] != p:
                raise DomainError("background rows have the wrong number of columns")
            rows.setflags(write=False)
            object.__setattr__(self, "rows", rows)

    @property
    def p(self) -> int:
        return self.means.size

    @property
    def stds(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @classmethod
    def from_matrix(cls, x, max_rows: int = MAX_BACKGROUND_ROWS) -> "BackgroundStats":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[0] < 1:
            raise DomainError("background needs at least one row")
        cov = np.cov(x, rowvar=False, bias=True) if x.shape[0] > 1 else np.zeros((x.shape[1], x.shape[1]))
        cov = np.atleast_2d(cov)
        cov = 0.5 * (cov + cov.T)
        if x.shape[0] > max_rows:
            # evenly spaced rows keep this deterministic without a seed
            keep = np.linspace(0, x.shape[0] - 1, max_rows).round().astype(int)
            rows = x[keep]
        else:
            rows = x
        return cls(means=x.mean(axis=0), covariance=cov, rows=rows)

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "covariance": self.covariance.tolist(),
            "rows": None if self.rows is None else self.rows.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackgroundStats":
        return cls(np.array(d["means"]), np.array(d["covariance"]), None if d.get("rows") is None else np.array(d["rows"]))
