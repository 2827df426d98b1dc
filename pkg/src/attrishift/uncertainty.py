"""Bootstrap prediction intervals and the sorted-thirds deterioration protocol."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ._parallel import ordered_map
from ._rng import derive_seeds, make_rng
from .attribution import ExplanationMatrix, explain_dataset
from .dataset import Dataset, rolling_windows, standardize_series, third_cuts
from .errors import DegenerateError, DomainError, NumericError
from .models import ModelSpec, Predictor, fit
from . import stats

METHODS = ("doubt", "ks_input", "psi_input", "pred_ks", "explanation_shift")
STANDARDIZE = ("all", "train")
MAX_RETRIES = 5


@dataclass(frozen=True)
class BootstrapEnsemble:
    members: tuple[Predictor, ...]
    member_seeds: tuple[int, ...]
    base_spec: ModelSpec

    def __post_init__(self):
        if len(self.members) < 2:
            raise DomainError("an ensemble needs at least two members")
        if len(self.members) != len(self.member_seeds):
            raise DomainError("one seed per member required")

    @property
    def size(self) -> int:
        return len(self.members)

    def member_predictions(self, x) -> np.ndarray:
        """Shape ``(B, n)``."""
        return np.stack([m.predict(x) for m in self.members])


def default_size(n: int) -> int:
    return max(2, math.ceil(math.sqrt(n)))


def _degenerate_resample(spec: ModelSpec, x: np.ndarray) -> bool:
    return not spec.is_linear and np.unique(x, axis=0).shape[0] < 2


def fit_bootstrap_ensemble(spec: ModelSpec, d: Dataset, B: Optional[int] = None, seed: int = 0) -> BootstrapEnsemble:
    """Fit ``B`` copies of ``spec`` on with-replacement resamples of ``d``.

    A resample that cannot be fit is redrawn with a seed derived from the
    member's seed, at most five times.
    """
    if d.y is None:
        raise DomainError("bootstrap ensemble needs a target")
    B = default_size(d.n) if B is None else int(B)
    if B < 2:
        raise DomainError("B must be at least 2")

    def one(s: int):
        tried = [s] + derive_seeds(s, MAX_RETRIES)
        last: Exception | None = None
        for cand in tried:
            idx = make_rng(cand).integers(0, d.n, size=d.n)
            sample = d.take(idx)
            if _degenerate_resample(spec, sample.x):
                last = DegenerateError("resample has a single distinct row")
                continue
            try:
                return fit(spec, sample), cand
            except NumericError as exc:
                last = exc
        raise DegenerateError(f"bootstrap member failed after {MAX_RETRIES} retries: {last}")

    fitted = ordered_map(one, derive_seeds(seed, B))
    return BootstrapEnsemble(tuple(m for m, _ in fitted), tuple(s for _, s in fitted), spec)


def interval_width(predictions: np.ndarray) -> np.ndarray:
    """``q0.975 - q0.025`` over axis 0 with linear interpolation."""
    q = np.quantile(predictions, [0.025, 0.975], axis=0, method="linear")
    return q[1] - q[0]


def uncertainty_width(e: BootstrapEnsemble, x0):
    """Width of the central 95% band of member predictions, per row."""
    x = np.asarray(x0.x if isinstance(x0, Dataset) else x0, dtype=float)
    w = interval_width(e.member_predictions(np.atleast_2d(x)))
    return float(w[0]) if x.ndim == 1 else w


# ---------------------------------------------------------------- monitoring


@dataclass(frozen=True)
class MonitoringCurve:
    centers: np.ndarray
    monitor: np.ndarray
    truth: np.ndarray
    score: float
    method: str
    feature: str
    raw_monitor: Optional[np.ndarray] = None
    raw_truth: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.centers.shape == self.monitor.shape == self.truth.shape):
            raise DomainError("curve series must have equal lengths")
        if not self.score >= 0:
            raise DomainError("score must be non-negative")

    def summary(self) -> dict:
        return {"method": self.method, "feature": self.feature, "score": self.score}

    def to_csv(self, path, comment: Optional[str] = None) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        lines = [] if comment is None else [f"# {comment}"]
        lines += ["window_center,monitor,truth"]
        lines += [f"{c:.17g},{m:.17g},{t:.17g}" for c, m, t in zip(self.centers, self.monitor, self.truth)]
        tmp.write_text("\n".join(lines) + "\n")
        tmp.replace(path)

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _window_means(values: np.ndarray, windows) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(values)])
    starts = np.array([w[0] for w in windows])
    size = windows[0].size
    return (c[starts + size] - c[starts]) / size


def _psi_fixed(edges: np.ndarray, expected_prop: np.ndarray, actual: np.ndarray) -> float:
    counts = np.bincount(np.searchsorted(edges, actual, side="left"), minlength=expected_prop.size)
    return stats.psi_from_proportions(expected_prop, counts / actual.size)


def monitor_deterioration(
    spec: ModelSpec,
    d: Dataset,
    feature: str,
    window: int = 50,
    method: str = "doubt",
    seed: int = 0,
    standardize: str = "all",
    stride: int = 1,
    B: Optional[int] = None,
    inspector_spec: Optional[ModelSpec] = None,
    feature_aggregate: str = "max",
) -> MonitoringCurve:
    """Sorted-thirds deterioration run for one monitoring method.

    The data are sorted by ``feature``; the model is fit on the middle third
    and every window of the full sorted data is scored against the true
    window MSE. Both series are standardized (over all windows, or with the
    statistics of windows inside the training section when
    ``standardize="train"``) and the score is the mean absolute difference
    over windows lying entirely in the lower or upper section.
    ``feature_aggregate`` (``"max"`` or ``"mean"``) combines per-feature
    input statistics.
    """
    if method not in METHODS:
        raise DomainError(f"unknown monitoring method {method!r}; expected one of {METHODS}")
    if standardize not in STANDARDIZE:
        raise DomainError(f"standardize must be one of {STANDARDIZE}")
    if feature_aggregate not in ("max", "mean"):
        raise DomainError("feature_aggregate must be 'max' or 'mean'")
    if d.y is None:
        raise DomainError("monitoring needs a target")
    if d.n < 3 * window:
        raise DomainError(f"need at least {3 * window} rows for window {window}")
    j = d.index_of(feature)
    ds = d.take(np.argsort(d.x[:, j], kind="stable"))
    c1, c2 = third_cuts(ds.n)
    train = ds.take(np.arange(c1, c2))
    f = fit(spec, train)
    windows = rolling_windows(ds.n, window, stride)
    starts = np.array([w[0] for w in windows])
    centers = starts + (window - 1) / 2.0
    pred = f.predict(ds.x)
    truth = _window_means((pred - ds.y) ** 2, windows)
    agg = np.max if feature_aggregate == "max" else np.mean

    if method == "doubt":
        ens = fit_bootstrap_ensemble(spec, train, B, seed)
        monitor = _window_means(uncertainty_width(ens, ds.x), windows)
    elif method == "ks_input":
        tx = train.x
        monitor = np.array([agg([stats.ks_statistic(ds.x[w, k], tx[:, k]) for k in range(ds.p)]) for w in windows])
    elif method == "psi_input":
        edges = [np.quantile(train.x[:, k], np.arange(1, 10) / 10) for k in range(ds.p)]
        props = [np.bincount(np.searchsorted(e, train.x[:, k], side="left"), minlength=10) / train.n for k, e in enumerate(edges)]
        monitor = np.array([agg([_psi_fixed(edges[k], props[k], ds.x[w, k]) for k in range(ds.p)]) for w in windows])
    elif method == "pred_ks":
        tp = pred[c1:c2]
        monitor = np.array([stats.ks_statistic(pred[w], tp) for w in windows])
    else:
        from .detectors import c2st

        s = explain_dataset(f, ds.x).values
        ref = s[c1:c2]
        seeds = derive_seeds(seed, len(windows))
        monitor = np.array(
            ordered_map(lambda a: c2st(ref, s[a[0]], f.feature_names, inspector_spec, a[1]).auc, list(zip(windows, seeds)))
        )

    if standardize == "all":
        m_std, _ = standardize_series(monitor)
        t_std, _ = standardize_series(truth)
    else:
        inside = (starts >= c1) & (starts + window <= c2)
        if inside.sum() < 2:
            raise DomainError("training section holds fewer than two windows")
        _, ms = standardize_series(monitor[inside])
        _, ts = standardize_series(truth[inside])
        m_std, t_std = ms.apply(monitor), ts.apply(truth)
    outer = (starts + window <= c1) | (starts >= c2)
    score = float(np.mean(np.abs(m_std[outer] - t_std[outer])))
    return MonitoringCurve(centers, m_std, t_std, score, method, feature, monitor, truth)


# ---------------------------------------------------------------- drivers


@dataclass(frozen=True)
class DeteriorationDrivers:
    global_importance: np.ndarray
    local: ExplanationMatrix
    widths: np.ndarray
    surrogate: Predictor

    def ranking(self) -> list[str]:
        order = np.argsort(-self.global_importance, kind="stable")
        return [self.local.feature_names[k] for k in order]


def deterioration_drivers(
    e: BootstrapEnsemble,
    d_probe: Dataset,
    surrogate_spec: Optional[ModelSpec] = None,
    seed: int = 0,
) -> DeteriorationDrivers:
    """Explain where uncertainty comes from with a surrogate ``X -> width``."""
    if d_probe.n < 50:
        raise DomainError("need at least 50 probe rows")
    surrogate_spec = surrogate_spec or ModelSpec("gbdt")
    if surrogate_spec.is_classifier:
        raise DomainError("the width surrogate must be a regression model")
    widths = uncertainty_width(e, d_probe.x)
    g = fit(surrogate_spec, Dataset(d_probe.x, d_probe.feature_names, y=widths))
    local = explain_dataset(g, d_probe.x, seed=seed)
    return DeteriorationDrivers(np.mean(np.abs(local.values), axis=0), local, widths, g)
