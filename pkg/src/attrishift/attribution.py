"""Feature attributions and explanation distributions.

Every explainer here works on a row or a matrix of rows and decomposes the
model's *margin* (the linear score, or log-odds for classifiers), so the
efficiency property holds exactly for the SHAP variants.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._rng import derive_seeds, make_rng
from .background import BackgroundStats
from .dataset import Dataset
from .errors import DomainError, MalformedTreeError, NumericError, SizeError, UnsupportedModelError
from .models import LEAF, Predictor, Tree

__all__ = [
    "BackgroundStats",
    "ExplanationMatrix",
    "explain_dataset",
    "gaussian_observational_value_fn",
    "interventional_value_fn",
    "lime_tabular",
    "shap_exact_enumeration",
    "shap_linear_interventional",
    "shap_linear_observational_gaussian",
    "shap_tree_path_dependent",
    "tree_conditional_value_fn",
]

MAX_ENUMERATION_FEATURES = 12
MAX_GAUSSIAN_FEATURES = 20
COV_RIDGE = 1e-9


@dataclass(frozen=True)
class ExplanationMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    base_value: float
    method: str = "shap"

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        if v.shape[1] != len(self.feature_names):
            raise DomainError("attribution columns do not match feature names")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def as_dataset(self, y=None, z=None) -> Dataset:
        """View the attributions as a feature matrix (the inspector's input)."""
        return Dataset(self.values, tuple(f"S_{s}" for s in self.feature_names), y=y, z=z)

    def to_csv(self, path, comment: Optional[str] = None, meta: Optional[dict] = None) -> Path:
        """Write values to ``path`` and ``base_value`` etc. to ``<path>.json``."""
        from .dataset import write_csv

        path = Path(path)
        write_csv(Dataset(self.values, self.feature_names), path, comment=comment)
        sidecar = path.with_name(path.name + ".json")
        doc = {"base_value": self.base_value, "feature_names": list(self.feature_names), "method": self.method}
        doc.update(meta or {})
        tmp = sidecar.with_name(sidecar.name + ".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        tmp.replace(sidecar)
        return sidecar

    @classmethod
    def from_csv(cls, path) -> "ExplanationMatrix":
        from .dataset import load_csv

        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".json").read_text())
        d = load_csv(path)
        return cls(d.x, d.feature_names, float(meta["base_value"]), meta.get("method", "shap"))


def _rows(x, p: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != p:
        raise DomainError(f"expected {p} features, got {x.shape[1]}")
    return x, single


def _require_linear(m: Predictor):
    if not m.is_linear:
        raise UnsupportedModelError(f"{m.spec.kind} is not a linear model")


def _background(m: Predictor, bg: Optional[BackgroundStats]) -> BackgroundStats:
    bg = bg if bg is not None else m.background
    if bg is None:
        raise DomainError("no background statistics available")
    if bg.p != m.p:
        raise DomainError(f"background has {bg.p} features, model has {m.p}")
    return bg


# ---------------------------------------------------------------- linear


def shap_linear_interventional(m: Predictor, x, bg: Optional[BackgroundStats] = None) -> np.ndarray:
    """``S_j = beta_j * (x_j - mu_j)``."""
    _require_linear(m)
    bg = _background(m, bg)
    xs, single = _rows(x, m.p)
    out = (xs - bg.means) * m.coef
    return out[0] if single else out


def shap_linear_observational_gaussian(m: Predictor, x, bg: Optional[BackgroundStats] = None) -> np.ndarray:
    """Exact Shapley values of a linear model under a Gaussian feature law.

    The value of a coalition T is the linear score with the features outside
    T replaced by their conditional mean given ``x_T``. All ``2^p`` coalitions
    are evaluated.
    """
    _require_linear(m)
    bg = _background(m, bg)
    p = m.p
    if p > MAX_GAUSSIAN_FEATURES:
        raise SizeError(f"{p} features exceeds the limit of {MAX_GAUSSIAN_FEATURES} for exact enumeration")
    xs, single = _rows(x, p)
    values = _gaussian_coalition_values(m.coef, m.intercept, bg.means, bg.covariance, xs)
    out = _shapley_from_table(values, p)
    return out[0] if single else out


def _gaussian_coalition_values(beta, intercept, mu, cov, xs) -> np.ndarray:
    p = beta.size
    n = xs.shape[0]
    table = np.empty((1 << p, n))
    features = np.arange(p)
    for mask in range(1 << p):
        inside = np.array([(mask >> j) & 1 for j in range(p)], dtype=bool)
        t, r = features[inside], features[~inside]
        if t.size == 0:
            table[mask] = intercept + beta @ mu
            continue
        known = xs[:, t] @ beta[t]
        if r.size == 0:
            table[mask] = intercept + known
            continue
        c_tt = cov[np.ix_(t, t)] + COV_RIDGE * np.eye(t.size)
        if np.linalg.cond(c_tt) > 1e14:
            raise NumericError("conditional covariance is singular after regularization")
        gain = np.linalg.solve(c_tt, cov[np.ix_(t, r)])  # Sigma_TT^-1 Sigma_TR
        cond_mean = mu[r] + (xs[:, t] - mu[t]) @ gain
        table[mask] = intercept + known + cond_mean @ beta[r]
    return table


def _shapley_weights(p: int) -> np.ndarray:
    return np.array([math.factorial(k) * math.factorial(p - k - 1) / math.factorial(p) for k in range(p)])


def _shapley_from_table(table: np.ndarray, p: int) -> np.ndarray:
    """Shapley values from coalition values indexed by bitmask; output (n, p)."""
    masks = np.arange(1 << p)
    sizes = np.array([bin(int(s)).count("1") for s in masks])
    weights = _shapley_weights(p)
    out = np.zeros((table.shape[1], p))
    for j in range(p):
        bit = 1 << j
        without = masks[(masks & bit) == 0]
        w = weights[sizes[without]]
        out[:, j] = w @ (table[without | bit] - table[without])
    return out


# ---------------------------------------------------------------- trees


def _check_tree(t: Tree) -> None:
    for j in range(t.n_nodes):
        if t.feature[j] != LEAF and t.cover[j] <= 0:
            raise MalformedTreeError(f"internal node {j} has zero cover")
        if t.feature[j] != LEAF and (t.cover[t.left[j]] <= 0 or t.cover[t.right[j]] <= 0):
            raise MalformedTreeError(f"node {j} has a child with zero cover")


def _extend(path, zero, one, feat):
    feats, zeros, ones, pw = path
    depth = len(feats)
    feats = feats + [feat]
    zeros = zeros + [zero]
    ones = ones + [one]
    n = one.shape[0]
    pw = pw + [np.ones(n) if depth == 0 else np.zeros(n)]
    for i in range(depth - 1, -1, -1):
        pw[i + 1] = pw[i + 1] + one * pw[i] * (i + 1) / (depth + 1)
        pw[i] = zero * pw[i] * (depth - i) / (depth + 1)
    return feats, zeros, ones, pw


def _unwind(path, k):
    feats, zeros, ones, pw = path
    depth = len(feats) - 1
    one, zero = ones[k], zeros[k]
    hot = one != 0
    safe_one = np.where(hot, one, 1.0)
    nxt = pw[depth]
    pw = list(pw[:depth])
    for i in range(depth - 1, -1, -1):
        w_hot = nxt * (depth + 1) / ((i + 1) * safe_one)
        w_cold = pw[i] * (depth + 1) / (zero * (depth - i))
        nxt_hot = pw[i] - w_hot * zero * (depth - i) / (depth + 1)
        pw[i] = np.where(hot, w_hot, w_cold)
        nxt = np.where(hot, nxt_hot, nxt)
    drop = lambda lst: lst[:k] + lst[k + 1 :]
    return drop(feats), drop(zeros), drop(ones), pw


def _unwound_sum(path, k):
    feats, zeros, ones, pw = path
    depth = len(feats) - 1
    one, zero = ones[k], zeros[k]
    hot = one != 0
    safe_one = np.where(hot, one, 1.0)
    nxt = pw[depth]
    total_hot = np.zeros_like(nxt)
    total_cold = np.zeros_like(nxt)
    for i in range(depth - 1, -1, -1):
        tmp = nxt / ((i + 1) * safe_one)
        total_hot = total_hot + tmp
        nxt = pw[i] - tmp * zero * (depth - i)
        total_cold = total_cold + pw[i] / (zero * (depth - i))
    return np.where(hot, total_hot, total_cold) * (depth + 1)


def _tree_shap(t: Tree, xs: np.ndarray, phi: np.ndarray, scale: float) -> None:
    """Path-dependent TreeSHAP, vectorized over rows; adds into ``phi``.

    The traversal is the same for every row: both children are always
    visited and only the per-row "one fractions" (does the row follow this
    branch?) differ.
    """
    n = xs.shape[0]

    def recurse(node, path, zero, one, feat):
        path = _extend(path, zero, one, feat)
        feats, zeros, ones, _ = path
        if t.feature[node] == LEAF:
            v = t.value[node] * scale
            for i in range(1, len(feats)):
                w = _unwound_sum(path, i)
                phi[:, feats[i]] += w * (ones[i] - zeros[i]) * v
            return
        f = int(t.feature[node])
        go_left = (xs[:, f] < t.threshold[node]).astype(float)
        l, r = int(t.left[node]), int(t.right[node])
        in_zero, in_one = 1.0, np.ones(n)
        if f in feats[1:]:
            k = feats.index(f, 1)
            in_zero, in_one = zeros[k], ones[k]
            path = _unwind(path, k)
        cov = t.cover[node]
        recurse(l, path, in_zero * t.cover[l] / cov, in_one * go_left, f)
        recurse(r, path, in_zero * t.cover[r] / cov, in_one * (1.0 - go_left), f)

    if t.feature[0] == LEAF:
        return
    recurse(0, ([], [], [], []), 1.0, np.ones(n), -1)


def _tree_models(m: Predictor):
    if m.is_linear:
        raise UnsupportedModelError("path-dependent attribution needs a tree model")
    return m.trees, m.tree_scale


def tree_expected_value(m: Predictor) -> float:
    trees, scale = _tree_models(m)
    return m.base_score + scale * sum(t.expected_value() for t in trees)


def shap_tree_path_dependent(m: Predictor, x) -> np.ndarray:
    """Path-dependent (cover-weighted) TreeSHAP summed over the ensemble."""
    trees, scale = _tree_models(m)
    xs, single = _rows(x, m.p)
    phi = np.zeros_like(xs)
    for t in trees:
        _check_tree(t)
        _tree_shap(t, xs, phi, scale)
    return phi[0] if single else phi


# ---------------------------------------------------------------- value functions and enumeration


def shap_exact_enumeration(value_fn: Callable, p: int) -> np.ndarray:
    """Exact Shapley values by summing over every coalition.

    ``value_fn`` receives a ``frozenset`` of player indices and returns a
    number or an array (one value per row). The result has the players on
    the last axis.
    """
    if p < 1:
        raise DomainError("need at least one player")
    if p > MAX_ENUMERATION_FEATURES:
        raise SizeError(f"{p} players exceeds the enumeration limit of {MAX_ENUMERATION_FEATURES}")
    vals = {}
    for mask in range(1 << p):
        vals[mask] = np.asarray(value_fn(frozenset(j for j in range(p) if (mask >> j) & 1)), dtype=float)
    weights = _shapley_weights(p)
    out = []
    for j in range(p):
        bit = 1 << j
        total = 0.0
        for mask in range(1 << p):
            if mask & bit:
                continue
            total = total + weights[bin(mask).count("1")] * (vals[mask | bit] - vals[mask])
        out.append(total)
    return np.stack(out, axis=-1)


def interventional_value_fn(m: Predictor, x, background_rows) -> Callable:
    """Mean margin over background rows with the coalition's features set from ``x``."""
    xs, _ = _rows(x, m.p)
    bg = np.atleast_2d(np.asarray(background_rows, dtype=float))

    def val(coalition):
        cols = sorted(coalition)
        out = np.empty(xs.shape[0])
        for i, row in enumerate(xs):
            probe = bg.copy()
            probe[:, cols] = row[cols]
            out[i] = m.margin(probe).mean()
        return out

    return val


def gaussian_observational_value_fn(m: Predictor, x, bg: BackgroundStats) -> Callable:
    """Conditional-mean coalition value for a linear model, one coalition at a time."""
    _require_linear(m)
    xs, _ = _rows(x, m.p)
    mu, cov, beta = bg.means, bg.covariance, m.coef

    def val(coalition):
        t = np.array(sorted(coalition), dtype=int)
        r = np.array([j for j in range(m.p) if j not in coalition], dtype=int)
        filled = np.tile(mu, (xs.shape[0], 1))
        if t.size:
            filled[:, t] = xs[:, t]
        if t.size and r.size:
            c_tt = cov[np.ix_(t, t)] + COV_RIDGE * np.eye(t.size)
            filled[:, r] = mu[r] + (xs[:, t] - mu[t]) @ np.linalg.inv(c_tt) @ cov[np.ix_(t, r)]
        return filled @ beta + m.intercept

    return val


def tree_conditional_value_fn(m: Predictor, x) -> Callable:
    """Cover-weighted conditional expectation of the ensemble margin.

    Splits on features in the coalition follow ``x``; other splits average
    their children weighted by training cover.
    """
    trees, scale = _tree_models(m)
    xs, _ = _rows(x, m.p)

    def g(t: Tree, node: int, coalition) -> np.ndarray:
        if t.feature[node] == LEAF:
            return np.full(xs.shape[0], t.value[node])
        f = int(t.feature[node])
        l, r = int(t.left[node]), int(t.right[node])
        if f in coalition:
            return np.where(xs[:, f] < t.threshold[node], g(t, l, coalition), g(t, r, coalition))
        return (t.cover[l] * g(t, l, coalition) + t.cover[r] * g(t, r, coalition)) / t.cover[node]

    def val(coalition):
        return m.base_score + scale * sum(g(t, 0, coalition) for t in trees)

    return val


# ---------------------------------------------------------------- LIME


def default_kernel_width(p: int) -> float:
    return 0.75 * math.sqrt(p)


def lime_tabular(
    m: Predictor,
    x,
    bg: Optional[BackgroundStats] = None,
    n_samples: int = 5000,
    kernel_width: Optional[float] = None,
    seed: int = 0,
    return_coef: bool = False,
):
    """Local weighted linear surrogate around one row.

    Perturbations are Gaussian with the background's per-feature spread and
    are weighted by ``exp(-d^2 / width^2)``, ``d`` the standardized distance
    to ``x``. The attribution is ``coef_j * (x_j - mu_j)``.
    """
    bg = _background(m, bg)
    row = np.asarray(x, dtype=float).ravel()
    p = m.p
    if row.size != p:
        raise DomainError(f"expected {p} features, got {row.size}")
    if n_samples < p + 2:
        raise DomainError(f"n_samples must be at least p + 2 = {p + 2}")
    width = default_kernel_width(p) if kernel_width is None else float(kernel_width)
    if width <= 0:
        raise DomainError("kernel width must be positive")
    std = bg.stds
    if np.any(std <= 0):
        raise NumericError("degenerate weighted design: a background feature has zero spread")
    rng = make_rng(seed)
    noise = rng.normal(size=(n_samples, p))
    samples = row + noise * std
    target = m.margin(samples)
    dist2 = np.sum(noise**2, axis=1)
    w = np.exp(-dist2 / width**2)
    design = np.column_stack([np.ones(n_samples), samples - row])
    sw = np.sqrt(w)
    a = design * sw[:, None]
    if np.linalg.matrix_rank(a) < p + 1:
        raise NumericError("degenerate weighted design")
    sol, *_ = np.linalg.lstsq(a, target * sw, rcond=None)
    coef = sol[1:]
    attr = coef * (row - bg.means)
    return (attr, coef) if return_coef else attr


# ---------------------------------------------------------------- datasets


def explain_dataset(
    m: Predictor,
    d,
    method: str = "shap_auto",
    bg: Optional[BackgroundStats] = None,
    linear_variant: str = "interventional",
    n_samples: int = 1000,
    kernel_width: Optional[float] = None,
    seed: int = 0,
) -> ExplanationMatrix:
    """Attribution of every row of ``d``.

    ``shap_auto`` uses the closed linear form for linear models
    (``linear_variant`` picks interventional or Gaussian observational) and
    path-dependent TreeSHAP for trees.
    """
    x = d.x if isinstance(d, Dataset) else np.atleast_2d(np.asarray(d, dtype=float))
    if x.shape[1] != m.p:
        raise DomainError(f"dataset has {x.shape[1]} features, model expects {m.p}")
    if method == "shap_auto":
        if m.is_linear:
            bgs = _background(m, bg)
            base = float(m.intercept + m.coef @ bgs.means)
            if linear_variant == "interventional":
                vals = shap_linear_interventional(m, x, bgs)
            elif linear_variant == "observational":
                vals = shap_linear_observational_gaussian(m, x, bgs)
            else:
                raise DomainError(f"unknown linear variant {linear_variant!r}")
            return ExplanationMatrix(vals, m.feature_names, base, f"shap_linear_{linear_variant}")
        return ExplanationMatrix(shap_tree_path_dependent(m, x), m.feature_names, tree_expected_value(m), "shap_tree")
    if method == "lime":
        bgs = _background(m, bg)
        seeds = derive_seeds(seed, x.shape[0])
        vals = np.array([lime_tabular(m, row, bgs, n_samples, kernel_width, s) for row, s in zip(x, seeds)]).reshape(x.shape)
        ref = bgs.rows if bgs.rows is not None else bgs.means[None, :]
        return ExplanationMatrix(vals, m.feature_names, float(m.margin(ref).mean()), "lime")
    raise DomainError(f"unknown explanation method {method!r}")
