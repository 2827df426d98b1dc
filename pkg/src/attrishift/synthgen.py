"""Seeded generators for the synthetic scenarios.

All draws come from :func:`attrishift._rng.make_rng` in a fixed order, so a
``ScenarioSpec`` fully determines its output. ``train`` and ``new`` use two
child seeds of ``spec.seed``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ._rng import Rng, derive_seeds, make_rng
from .dataset import Dataset
from .errors import DomainError

KINDS = (
    "et_fairness",
    "covariate_rho",
    "concept_pair",
    "unused_feature",
    "yule",
    "predshift_uniform",
    "power",
    "deterioration",
    "sweep_replace",
)

NOISE_STD = 0.1


def sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(t, dtype=float)))


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario kind plus its parameters. Irrelevant fields are ignored.

    Parameters
    ----------
    gamma, case, p5, target
        ``et_fairness``: correlation between the proxy and the protected
        driver, ``"indirect"`` or ``"uninformative"``, the five-feature
        variant, and ``"bernoulli"`` or ``"regression"`` targets.
    rho, with_x3
        ``covariate_rho``: correlation of ``(X1, X2)`` in the new sample;
        ``with_x3=False`` gives the two-feature ``Y = X1*X2 + e`` variant.
    shift
        ``unused_feature``: offset added to ``X3`` in the new sample.
    mu, q
        ``power``: class mean offset and ``P(Z=1)``.
    feature, lo, hi, recompute_target
        ``sweep_replace``: 1-based feature index replaced by an even grid,
        and whether the target is regenerated from the replaced values.
    """

    kind: str
    n: int = 10_000
    seed: int = 0
    gamma: float = 0.0
    case: str = "indirect"
    p5: bool = False
    target: str = "bernoulli"
    rho: float = 0.0
    with_x3: bool = True
    shift: float = 1.0
    mu: float = 0.0
    q: float = 0.5
    feature: int = 1
    lo: float = -3.0
    hi: float = 4.0
    recompute_target: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown scenario {self.kind!r}; expected one of {KINDS}")
        if self.n < 10:
            raise DomainError("n must be at least 10")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        if not 0.0 <= self.gamma < 1.0:
            raise DomainError("gamma must lie in [0, 1)")
        if not 0.0 <= self.rho < 1.0:
            raise DomainError("rho must lie in [0, 1)")
        if self.mu < 0:
            raise DomainError("mu must be >= 0")
        if not 0.0 < self.q < 1.0:
            raise DomainError("q must lie in (0, 1)")
        if self.case not in ("indirect", "uninformative"):
            raise DomainError("case must be 'indirect' or 'uninformative'")
        if self.target not in ("bernoulli", "regression"):
            raise DomainError("target must be 'bernoulli' or 'regression'")
        if self.feature not in (1, 2, 3):
            raise DomainError("feature must be 1, 2 or 3")
        if not self.lo < self.hi:
            raise DomainError("need lo < hi")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Scenario:
    spec: ScenarioSpec
    train: Dataset
    new: Dataset
    extras: dict = field(default_factory=dict)


def _names(p: int) -> tuple[str, ...]:
    return tuple(f"X{j}" for j in range(1, p + 1))


def _correlated(rng: Rng, driver: np.ndarray, r: float) -> np.ndarray:
    """Standard normal with correlation ``r`` to the standard normal ``driver``."""
    return r * driver + math.sqrt(1.0 - r * r) * rng.normal(size=driver.size)


def _et_fairness(spec: ScenarioSpec, rng: Rng) -> Dataset:
    n, g = spec.n, spec.gamma
    x1 = rng.normal(size=n)
    x2 = rng.normal(size=n)
    if spec.p5:
        x5 = rng.normal(size=n)
        x3 = _correlated(rng, x5, g)
        x4 = _correlated(rng, x5, 0.5 * g)
        z = (x5 > 0).astype(float)
        x = np.column_stack([x1, x2, x3, x4])
    else:
        x4 = rng.normal(size=n)
        x3 = _correlated(rng, x4, g)
        z = (x4 > 0).astype(float)
        x = np.column_stack([x1, x2, x3])
    signal = x.sum(axis=1) if spec.case == "indirect" else x1 + x2
    prob = sigmoid(signal)
    y = rng.bernoulli(prob, size=n) if spec.target == "bernoulli" else prob
    return Dataset(x, _names(x.shape[1]), y=y, z=z)


def _covariate(spec: ScenarioSpec, rng: Rng, rho: float) -> Dataset:
    n = spec.n
    x1 = rng.normal(size=n)
    x2 = _correlated(rng, x1, rho)
    if spec.with_x3:
        x3 = rng.normal(size=n)
        return Dataset(np.column_stack([x1, x2, x3]), _names(3), y=x1 * x2 + x3)
    y = x1 * x2 + rng.normal(0.0, NOISE_STD, n)
    return Dataset(np.column_stack([x1, x2]), _names(2), y=y)


def _deterioration(n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    x = rng.normal(1.0, math.sqrt(0.1), size=(n, 3))
    eps = rng.normal(0.0, NOISE_STD, n)
    return x, eps


def _deterioration_target(x, eps):
    return x[:, 0] ** 2 + x[:, 1] + eps


def _one(spec: ScenarioSpec, seed: int, role: str) -> Dataset:
    rng = make_rng(seed)
    n, kind = spec.n, spec.kind
    if kind == "et_fairness":
        return _et_fairness(spec, rng)
    if kind == "covariate_rho":
        return _covariate(spec, rng, spec.rho if role == "new" else 0.0)
    if kind == "concept_pair":
        x = rng.normal(1.0, 1.0, size=(n, 2))
        eps = rng.normal(0.0, NOISE_STD, n)
        if role == "train":
            y = x[:, 0] ** 2 * x[:, 1] + eps
        else:
            y = x[:, 0] * x[:, 1] ** 2 + eps
        return Dataset(x, _names(2), y=y)
    if kind == "unused_feature":
        x = rng.normal(size=(n, 3))
        y = x[:, 0] * x[:, 1] + rng.normal(0.0, NOISE_STD, n)
        if role == "new":
            x[:, 2] += spec.shift
        return Dataset(x, _names(3), y=y)
    if kind == "yule":
        z = rng.bernoulli(0.5, size=n)
        a = rng.uniform(-3.0, -1.0, size=n)
        b = rng.normal(2.0, 1.0, size=n)
        x1 = a * z + b * (1 - z)
        x2 = b * z + a * (1 - z)
        y = x1 + x2 + rng.normal(0.0, NOISE_STD, n)
        return Dataset(np.column_stack([x1, x2]), _names(2), y=y, z=z)
    if kind == "predshift_uniform":
        lo1, lo2 = (0.0, 1.0) if role == "train" else (1.0, 0.0)
        x1 = rng.uniform(lo1, lo1 + 1.0, size=n)
        x2 = rng.uniform(lo2, lo2 + 1.0, size=n)
        return Dataset(np.column_stack([x1, x2]), _names(2), y=x1 + x2)
    if kind == "power":
        z = rng.bernoulli(spec.q, size=n)
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        x = rng.multivariate_normal(np.zeros(2), cov, n)
        x += np.where(z[:, None] == 1, spec.mu, -spec.mu)
        return Dataset(x, _names(2), y=z, z=z)
    # deterioration and sweep_replace share the base sample
    x, eps = _deterioration(n, rng)
    y = _deterioration_target(x, eps)
    if kind == "sweep_replace" and role == "new":
        x[:, spec.feature - 1] = np.linspace(spec.lo, spec.hi, n)
        if spec.recompute_target:
            y = _deterioration_target(x, eps)
    return Dataset(x, _names(3), y=y)


def generate(spec: ScenarioSpec) -> Scenario:
    """Draw the ``train`` and ``new`` samples of a scenario.

    For ``concept_pair`` the new sample carries the changed target. For
    ``sweep_replace`` the new sample is the training law with one feature
    replaced by ``linspace(lo, hi, n)``; the target is regenerated from
    the replaced values unless ``recompute_target`` is off.
    """
    s_train, s_new = derive_seeds(spec.seed, 2)
    train = _one(spec, s_train, "train")
    new = _one(spec, s_new, "new")
    return Scenario(spec, train, new)
