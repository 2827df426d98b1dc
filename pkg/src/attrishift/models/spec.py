from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional

from ..errors import DomainError

KINDS = ("ols", "ridge", "logistic", "tree", "gbdt")
TASKS = ("regression", "classification")

_DEFAULTS = {
    "ols": dict(lam=0.0),
    "ridge": dict(lam=1e-6),
    "logistic": dict(lam=1.0, max_iter=1000, tol=1e-8),
    "tree": dict(max_depth=6, min_leaf=5, task="regression"),
    "gbdt": dict(n_trees=100, learning_rate=0.1, max_depth=3, min_leaf=1, task="regression"),
}

_INT_FIELDS = {"max_iter", "max_depth", "min_leaf", "n_trees"}
_FLOAT_FIELDS = {"lam", "tol", "learning_rate"}


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus hyperparameters; unset fields take the family default."""

    kind: str
    lam: Optional[float] = None
    max_iter: Optional[int] = None
    tol: Optional[float] = None
    max_depth: Optional[int] = None
    min_leaf: Optional[int] = None
    task: Optional[str] = None
    n_trees: Optional[int] = None
    learning_rate: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        for key, value in _DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        for key in self.hyperparameters():
            if key not in _DEFAULTS[self.kind]:
                raise DomainError(f"{key!r} is not a hyperparameter of {self.kind}")
        if self.lam is not None and self.lam < 0:
            raise DomainError("regularization strength must be >= 0")
        for key in ("max_iter", "max_depth", "min_leaf", "n_trees"):
            v = getattr(self, key)
            if v is not None and v < 1:
                raise DomainError(f"{key} must be >= 1")
        for key in ("tol", "learning_rate"):
            v = getattr(self, key)
            if v is not None and v <= 0:
                raise DomainError(f"{key} must be > 0")
        if self.task is not None and self.task not in TASKS:
            raise DomainError(f"task must be one of {TASKS}")

    @property
    def is_linear(self) -> bool:
        return self.kind in ("ols", "ridge", "logistic")

    @property
    def is_classifier(self) -> bool:
        return self.kind == "logistic" or self.task == "classification"

    def hyperparameters(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "kind" and v is not None}

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.hyperparameters()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(**d)

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Parse ``kind`` or ``kind:key=value,key=value`` (CLI syntax)."""
        kind, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise DomainError(f"bad model parameter {item!r}; expected key=value")
            key = key.strip()
            if key in _INT_FIELDS:
                params[key] = int(value)
            elif key in _FLOAT_FIELDS:
                params[key] = float(value)
            elif key == "task":
                params[key] = value.strip()
            else:
                raise DomainError(f"unknown model parameter {key!r}")
        return cls(kind=kind.strip(), **params)


def logistic(lam: float = 1.0, **kw) -> ModelSpec:
    return ModelSpec("logistic", lam=lam, **kw)
