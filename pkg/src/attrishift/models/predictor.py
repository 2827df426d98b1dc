from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..background import BackgroundStats
from ..dataset import Dataset
from ..errors import DomainError, ShapeError
from .linear import fit_logistic, fit_ridge
from .spec import ModelSpec
from .tree import Tree, fit_gbdt, fit_tree

FORMAT = "attrishift.predictor"
FORMAT_VERSION = 1


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


@dataclass(frozen=True)
class Predictor:
    """A fitted model.

    ``margin`` is the raw output that attributions decompose: the linear
    score for linear models (log-odds for logistic) and the summed tree
    output for tree models (log-odds for classification). ``predict``
    applies the link, so it returns probabilities for classifiers.
    """

    spec: ModelSpec
    feature_names: tuple[str, ...]
    coef: Optional[np.ndarray] = None
    intercept: float = 0.0
    trees: tuple[Tree, ...] = ()
    base_score: float = 0.0
    background: Optional[BackgroundStats] = None
    train_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def p(self) -> int:
        return len(self.feature_names)

    @property
    def is_linear(self) -> bool:
        return self.spec.is_linear

    @property
    def tree_scale(self) -> float:
        """Weight applied to every tree's output."""
        return self.spec.learning_rate if self.spec.kind == "gbdt" else 1.0

    def _check(self, x) -> np.ndarray:
        if isinstance(x, Dataset):
            x = x.x
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.p:
            raise ShapeError(f"expected {self.p} columns, got shape {x.shape}")
        return x

    def margin(self, x) -> np.ndarray:
        x = self._check(x)
        if self.is_linear:
            return x @ self.coef + self.intercept
        out = np.full(x.shape[0], self.base_score)
        for t in self.trees:
            out = out + self.tree_scale * t.predict(x)
        return out

    def predict(self, x) -> np.ndarray:
        raw = self.margin(x)
        if self.spec.kind == "logistic" or (self.spec.kind == "gbdt" and self.spec.task == "classification"):
            return _sigmoid(raw)
        return raw

    def to_dict(self) -> dict:
        params: dict = {}
        if self.is_linear:
            params["coef"] = self.coef.tolist()
            params["intercept"] = self.intercept
        else:
            params["trees"] = [t.to_dict() for t in self.trees]
            params["base_score"] = self.base_score
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.spec.kind,
            "hyperparameters": self.spec.hyperparameters(),
            "parameters": params,
            "feature_names": list(self.feature_names),
            "background": None if self.background is None else self.background.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Predictor":
        if d.get("format") != FORMAT:
            raise DomainError("not a serialized predictor")
        if d.get("version") != FORMAT_VERSION:
            raise DomainError(f"unsupported predictor format version {d.get('version')}")
        spec = ModelSpec(kind=d["kind"], **d["hyperparameters"])
        params = d["parameters"]
        bg = None if d.get("background") is None else BackgroundStats.from_dict(d["background"])
        names = tuple(d["feature_names"])
        if spec.is_linear:
            return cls(spec, names, coef=np.asarray(params["coef"], dtype=float), intercept=float(params["intercept"]), background=bg)
        trees = tuple(Tree.from_dict(t) for t in params["trees"])
        return cls(spec, names, trees=trees, base_score=float(params["base_score"]), background=bg)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Predictor":
        return cls.from_dict(json.loads(text))


def fit(spec: ModelSpec, d: Dataset) -> Predictor:
    """Fit ``spec`` to ``d.x`` -> ``d.y``."""
    if d.y is None:
        raise DomainError("fitting needs a target")
    if d.n < 2:
        raise DomainError("fitting needs at least two rows")
    x, y = d.x, d.y
    bg = BackgroundStats.from_matrix(x)
    if spec.kind in ("ols", "ridge"):
        coef, intercept = fit_ridge(x, y, spec.lam)
        return Predictor(spec, d.feature_names, coef=coef, intercept=intercept, background=bg)
    if spec.kind == "logistic":
        coef, intercept, hist = fit_logistic(x, y, spec.lam, spec.max_iter, spec.tol)
        return Predictor(spec, d.feature_names, coef=coef, intercept=intercept, background=bg, train_history=tuple(hist))
    if spec.kind == "tree":
        if spec.task == "classification":
            if not np.all((y == 0) | (y == 1)):
                raise DomainError("classification target must be in {0, 1}")
            tree = fit_tree(x, y, spec.max_depth, spec.min_leaf, "gini")
        else:
            tree = fit_tree(x, y, spec.max_depth, spec.min_leaf, "mse")
        return Predictor(spec, d.feature_names, trees=(tree,), base_score=0.0, background=bg)
    base, trees, hist = fit_gbdt(x, y, spec.n_trees, spec.learning_rate, spec.max_depth, spec.min_leaf, spec.task)
    return Predictor(spec, d.feature_names, trees=tuple(trees), base_score=base, background=bg, train_history=tuple(hist))


def predict(m: Predictor, x) -> np.ndarray:
    return m.predict(x)
