"""Classifier two-sample tests on explanations, predictions and inputs.

Every detector follows the same pattern: build an input matrix for an
inspector ``g`` (explanations, predictions or raw features), fit ``g`` on one
part of the data to tell two groups apart, and report the held-out AUC with
a one-sided Brunner-Munzel test of ``AUC = 1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_seeds, make_rng
from .attribution import explain_dataset
from .dataset import Dataset
from .errors import DegenerateError, DomainError, SchemaError
from .models import ModelSpec, Predictor, fit
from . import stats
from .stats import TestResult

KINDS = ("et", "dp", "combined", "explanation_shift", "input_c2st", "output_c2st")
SUBSAMPLE_FRACTION = 0.632


def default_inspector() -> ModelSpec:
    return ModelSpec("logistic")


@dataclass(frozen=True)
class Driver:
    feature: str
    coefficient: float
    distance: Optional[float] = None

    def to_dict(self) -> dict:
        return {"feature": self.feature, "coefficient": self.coefficient, "distance": self.distance}


@dataclass(frozen=True)
class DetectorReport:
    auc: float
    test: TestResult
    drivers: tuple[Driver, ...]
    kind: str
    inspector: Predictor = field(repr=False, compare=False)
    seed: int = 0
    train_data: Optional[Dataset] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown detector kind {self.kind!r}")
        if not 0.0 <= self.auc <= 1.0:
            raise DomainError("AUC outside [0, 1]")
        if len(self.drivers) != self.inspector.p:
            raise DomainError("one driver per inspector input required")

    @property
    def p_value(self) -> float:
        return self.test.p_value

    def with_distances(self, distances) -> "DetectorReport":
        drivers = tuple(replace(dr, distance=float(v)) for dr, v in zip(self.drivers, distances))
        return replace(self, drivers=drivers)

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "p_value": self.test.p_value,
            "statistic": self.test.statistic,
            "ci": [self.test.ci_low, self.test.ci_high],
            "drivers": [dr.to_dict() for dr in self.drivers],
            "kind": self.kind,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ShiftScoreboard:
    """Monitoring value of each baseline plus the explanation-shift AUC."""

    b1_input_ks: float
    b2_prediction_wasserstein: float
    b3_explanation_ndcg: float
    b4_prediction_ks: float
    b5_uncertainty: float
    b6_input_c2st: float
    b7_output_c2st: float
    explanation_shift: float

    def __post_init__(self):
        for k, v in self.to_dict().items():
            if not math.isfinite(v):
                raise DomainError(f"{k} is not finite")
        for k in ("b6_input_c2st", "b7_output_c2st", "explanation_shift"):
            if not 0.0 <= getattr(self, k) <= 1.0:
                raise DomainError(f"{k} must be an AUC in [0, 1]")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# ---------------------------------------------------------------- core


def auc_test(scores, labels) -> tuple[float, TestResult]:
    """Held-out AUC and the one-sided Brunner-Munzel test (negatives vs positives).

    Fully tied scores carry no evidence either way and get ``p = 0.5``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    a = stats.auc(scores, labels)
    neg, pos = scores[labels == 0], scores[labels == 1]
    try:
        t = stats.brunner_munzel(neg, pos, "greater")
    except DegenerateError:
        t = TestResult(0.0, 0.5, a, a, a, "greater")
    return a, t


def _check_classes(z: np.ndarray, where: str) -> None:
    if np.unique(z).size < 2:
        raise DomainError(f"{where}: both groups must be present")


def _drivers(g: Predictor, inputs: np.ndarray) -> tuple[Driver, ...]:
    if g.is_linear:
        coef = g.coef
    else:
        coef = np.mean(np.abs(explain_dataset(g, inputs).values), axis=0)
    return tuple(Driver(name, float(c)) for name, c in zip(g.feature_names, coef))


def _inspect(a_train, z_train, a_test, z_test, names, inspector_spec, kind, seed) -> DetectorReport:
    _check_classes(z_train, "inspector training data")
    _check_classes(z_test, "inspector test data")
    spec = inspector_spec or default_inspector()
    train = Dataset(a_train, names, y=z_train)
    g = fit(spec, train)
    scores = g.predict(a_test)
    a, t = auc_test(scores, z_test)
    return DetectorReport(a, t, _drivers(g, a_test), kind, g, seed, train)


def _halves(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = make_rng(seed).permutation(n)
    h = n // 2
    return np.sort(perm[:h]), np.sort(perm[h:])


def c2st(ref, new, names: Sequence[str], inspector_spec: Optional[ModelSpec] = None, seed: int = 0, kind: str = "explanation_shift") -> DetectorReport:
    """Two-sample test: label ``ref`` rows 0 and ``new`` rows 1.

    Each sample is halved by the same seeded permutation rule, so swapping
    the samples swaps the labels and nothing else.
    """
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    new = np.atleast_2d(np.asarray(new, dtype=float))
    if ref.shape[0] < 4 or new.shape[0] < 4:
        raise DomainError("each sample needs at least four rows")
    r_tr, r_te = _halves(ref.shape[0], seed)
    n_tr, n_te = _halves(new.shape[0], seed)
    a_train = np.vstack([ref[r_tr], new[n_tr]])
    z_train = np.concatenate([np.zeros(r_tr.size), np.ones(n_tr.size)])
    a_test = np.vstack([ref[r_te], new[n_te]])
    z_test = np.concatenate([np.zeros(r_te.size), np.ones(n_te.size)])
    return _inspect(a_train, z_train, a_test, z_test, tuple(names), inspector_spec, kind, seed)


def _check_schema(f: Predictor, *ds: Dataset) -> None:
    for d in ds:
        if d.feature_names != f.feature_names:
            raise SchemaError(f"feature schema {list(d.feature_names)} does not match the model's {list(f.feature_names)}")


def _check_protected(d: Dataset, where: str) -> None:
    if d.z is None:
        raise SchemaError(f"{where}: protected attribute missing")
    _check_classes(d.z, where)
    for j, name in enumerate(d.feature_names):
        if np.array_equal(d.x[:, j], d.z):
            raise DomainError(f"protected attribute appears among the model inputs as {name!r}")


def _explanation_names(f: Predictor) -> tuple[str, ...]:
    return tuple(f"S_{s}" for s in f.feature_names)


# ---------------------------------------------------------------- detectors


def et_inspect(f: Predictor, d_val: Dataset, d_te: Dataset, inspector_spec: Optional[ModelSpec] = None, seed: int = 0) -> DetectorReport:
    """Equal-treatment inspector: predict the protected group from explanations.

    ``g`` is fit on the explanations of ``d_val`` and evaluated on those of
    ``d_te``.
    """
    _check_protected(d_val, "d_val")
    _check_protected(d_te, "d_te")
    _check_schema(f, d_val, d_te)
    s_val = explain_dataset(f, d_val).values
    s_te = explain_dataset(f, d_te).values
    return _inspect(s_val, d_val.z, s_te, d_te.z, _explanation_names(f), inspector_spec, "et", seed)


def _prediction_inputs(f: Predictor, d: Dataset, combined: bool) -> np.ndarray:
    pred = f.predict(d.x)[:, None]
    return np.hstack([pred, d.x]) if combined else pred


def dp_inspect(
    f: Predictor,
    d_val: Dataset,
    d_te: Dataset,
    inspector_spec: Optional[ModelSpec] = None,
    seed: int = 0,
    combined: bool = False,
) -> DetectorReport:
    """Demographic-parity inspector on ``f(x)``, or on ``(f(x), x)`` if ``combined``."""
    _check_protected(d_val, "d_val")
    _check_protected(d_te, "d_te")
    _check_schema(f, d_val, d_te)
    names = ("prediction",) + (f.feature_names if combined else ())
    return _inspect(
        _prediction_inputs(f, d_val, combined),
        d_val.z,
        _prediction_inputs(f, d_te, combined),
        d_te.z,
        names,
        inspector_spec,
        "combined" if combined else "dp",
        seed,
    )


def shift_detect(f: Predictor, d_val: Dataset, d_new: Dataset, inspector_spec: Optional[ModelSpec] = None, seed: int = 0) -> DetectorReport:
    """Explanation-shift detector: C2ST between explanations of ``d_val`` (0) and ``d_new`` (1)."""
    _check_schema(f, d_val, d_new)
    s_val = explain_dataset(f, d_val).values
    s_new = explain_dataset(f, d_new).values
    return c2st(s_val, s_new, _explanation_names(f), inspector_spec, seed, "explanation_shift")


def input_c2st(d_val: Dataset, d_new: Dataset, inspector_spec: Optional[ModelSpec] = None, seed: int = 0) -> DetectorReport:
    if d_val.feature_names != d_new.feature_names:
        raise SchemaError("feature schemas differ")
    return c2st(d_val.x, d_new.x, d_val.feature_names, inspector_spec, seed, "input_c2st")


def output_c2st(f: Predictor, d_val: Dataset, d_new: Dataset, inspector_spec: Optional[ModelSpec] = None, seed: int = 0) -> DetectorReport:
    _check_schema(f, d_val, d_new)
    return c2st(f.predict(d_val.x)[:, None], f.predict(d_new.x)[:, None], ("prediction",), inspector_spec, seed, "output_c2st")


def baseline_suite(
    f: Predictor,
    d_val: Dataset,
    d_new: Dataset,
    seed: int = 0,
    inspector_spec: Optional[ModelSpec] = None,
    B: Optional[int] = None,
) -> ShiftScoreboard:
    """All baseline monitoring values next to the explanation-shift AUC.

    B5 refits ``f``'s specification as a bootstrap ensemble on ``d_val``
    (which therefore needs labels) and averages its interval width on
    ``d_new``.
    """
    from .uncertainty import fit_bootstrap_ensemble, uncertainty_width

    _check_schema(f, d_val, d_new)
    if d_val.y is None:
        raise DomainError("B5 needs labels on d_val")
    s_ens, s_c2st = derive_seeds(seed, 2)
    p_val, p_new = f.predict(d_val.x), f.predict(d_new.x)
    e_val = explain_dataset(f, d_val).values
    e_new = explain_dataset(f, d_new).values
    ens = fit_bootstrap_ensemble(f.spec, d_val, B, s_ens)
    names = _explanation_names(f)
    return ShiftScoreboard(
        b1_input_ks=max(stats.ks_statistic(d_val.x[:, j], d_new.x[:, j]) for j in range(d_val.p)),
        b2_prediction_wasserstein=stats.wasserstein1(p_val, p_new),
        b3_explanation_ndcg=1.0 - stats.ndcg_importance(np.abs(e_val).mean(axis=0), np.abs(e_new).mean(axis=0)),
        b4_prediction_ks=stats.ks_statistic(p_val, p_new),
        b5_uncertainty=float(np.mean(uncertainty_width(ens, d_new.x))),
        b6_input_c2st=c2st(d_val.x, d_new.x, d_val.feature_names, inspector_spec, s_c2st, "input_c2st").auc,
        b7_output_c2st=c2st(p_val[:, None], p_new[:, None], ("prediction",), inspector_spec, s_c2st, "output_c2st").auc,
        explanation_shift=c2st(e_val, e_new, names, inspector_spec, s_c2st, "explanation_shift").auc,
    )


# ---------------------------------------------------------------- drivers


def _coefficients(spec: ModelSpec, x: np.ndarray, labels: np.ndarray, names) -> np.ndarray:
    g = fit(spec, Dataset(x, names, y=labels))
    if g.is_linear:
        return g.coef
    return np.mean(np.abs(explain_dataset(g, x).values), axis=0)


def explain_drivers(
    report: DetectorReport,
    d_reference: Optional[Dataset] = None,
    n_bootstrap: int = 1000,
    seed: int = 0,
    fraction: float = SUBSAMPLE_FRACTION,
) -> np.ndarray:
    """Per-feature distance between true-label and random-label coefficient laws.

    ``d_reference`` holds inspector inputs with group labels in ``y`` (or
    ``z``); it defaults to the data the inspector was trained on. Each
    bootstrap round refits the inspector on a subsample twice, once with the
    true labels and once with the labels permuted, and the W1 distance
    between the two coefficient samples is reported per feature.
    """
    if n_bootstrap < 50:
        raise DomainError("n_bootstrap must be at least 50")
    if not 0.0 < fraction <= 1.0:
        raise DomainError("fraction must lie in (0, 1]")
    ref = d_reference if d_reference is not None else report.train_data
    if ref is None:
        raise DomainError("no reference data for driver bootstrap")
    labels = ref.y if ref.y is not None else ref.z
    if labels is None:
        raise SchemaError("reference data carries no group labels")
    if ref.p != report.inspector.p:
        raise DomainError("reference data does not match the inspector's inputs")
    spec = report.inspector.spec
    m = max(4, int(round(fraction * ref.n)))
    true_coef, rand_coef = [], []
    for s in derive_seeds(seed, n_bootstrap):
        rng = make_rng(s)
        idx = np.sort(rng.choice(ref.n, m, replace=False))
        x, lab = ref.x[idx], labels[idx]
        shuffled = lab[rng.permutation(m)]
        if np.unique(lab).size < 2:
            continue
        true_coef.append(_coefficients(spec, x, lab, ref.feature_names))
        rand_coef.append(_coefficients(spec, x, shuffled, ref.feature_names))
    if len(true_coef) < 2:
        raise DomainError("too few usable bootstrap rounds")
    t, r = np.array(true_coef), np.array(rand_coef)
    return np.array([stats.wasserstein1(t[:, k], r[:, k]) for k in range(ref.p)])


# ---------------------------------------------------------------- power study

POWER_MU_GRID = (0.005, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
POWER_TESTS = ("bm_auc", "accuracy", "asymptotic_auc")


@dataclass(frozen=True)
class PowerPoint:
    mu: float
    q: float
    runs: int
    rejections: dict

    def power(self, test: str) -> float:
        return self.rejections[test] / self.runs

    def standard_error(self, test: str) -> float:
        p = self.power(test)
        return math.sqrt(p * (1.0 - p) / self.runs)

    def to_dict(self) -> dict:
        out = {"mu": self.mu, "q": self.q, "runs": self.runs}
        out.update({f"{t}_power": self.power(t) for t in POWER_TESTS})
        return out


def independence_tests(x: np.ndarray, z: np.ndarray, seed: int, inspector_spec: Optional[ModelSpec] = None) -> dict:
    """p-values of the three C2ST variants on one sample of ``(x, z)``.

    The rows are halved at random; the inspector is fit on one half and
    scored on the other. The accuracy variant thresholds probabilities at
    1/2 and compares held-out accuracy with the majority-class rate.
    """
    n = x.shape[0]
    tr, te = _halves(n, seed)
    names = tuple(f"W{j}" for j in range(1, x.shape[1] + 1))
    _check_classes(z[tr], "inspector training data")
    g = fit(inspector_spec or default_inspector(), Dataset(x[tr], names, y=z[tr]))
    scores, labels = g.predict(x[te]), z[te]
    out = {}
    try:
        _, t = auc_test(scores, labels)
        out["bm_auc"] = t.p_value
        out["asymptotic_auc"] = stats.auc_test_asymptotic(scores, labels).p_value
    except (DomainError, DegenerateError):
        out["bm_auc"] = out["asymptotic_auc"] = 1.0
    correct = int(np.sum((scores > 0.5) == (labels == 1)))
    rate = float(labels.mean())
    out["accuracy"] = stats.accuracy_test(correct, labels.size, min(max(rate, 1.0 - rate), 1.0 - 1e-12)).p_value
    return out


def power_point(mu: float, q: float, runs: int = 200, n: int = 200, seed: int = 0, alpha: float = 0.05) -> PowerPoint:
    """Rejection counts of each test over ``runs`` Gaussian-mixture samples."""
    from .synthgen import ScenarioSpec, generate

    if runs < 1:
        raise DomainError("runs must be >= 1")
    counts = dict.fromkeys(POWER_TESTS, 0)
    for s in derive_seeds(seed, runs):
        d = generate(ScenarioSpec("power", n=n, seed=s, mu=mu, q=q)).train
        try:
            ps = independence_tests(d.x, d.z, s)
        except DomainError:
            continue  # a half without one of the groups: no rejection
        for t in POWER_TESTS:
            counts[t] += int(ps[t] < alpha)
    return PowerPoint(mu, q, runs, counts)


def power_study(mus=POWER_MU_GRID, qs=(0.5, 0.2), runs: int = 200, n: int = 200, seed: int = 0, alpha: float = 0.05) -> list[PowerPoint]:
    seeds = derive_seeds(seed, len(mus) * len(qs))
    grid = [(mu, q) for q in qs for mu in mus]
    return [power_point(mu, q, runs, n, s, alpha) for (mu, q), s in zip(grid, seeds)]
