"""Rank tests, distribution distances and ranking similarity.

scipy is used only for reference distributions (t, normal, binomial,
Kolmogorov) and midranks; the statistics themselves are computed here.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy import special
from scipy import stats as sps

from .errors import DegenerateError, DomainError

__all__ = [
    "TestResult",
    "accuracy_test",
    "auc",
    "auc_test_asymptotic",
    "brunner_munzel",
    "ks_statistic",
    "ks_two_sample",
    "ndcg_importance",
    "psi",
    "psi_from_proportions",
    "wasserstein1",
]

ALTERNATIVES = ("two_sided", "greater")
PSI_FLOOR = 1e-6


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    auc: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    alternative: str = "greater"
    df: Optional[float] = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")
        if self.alternative not in ALTERNATIVES:
            raise DomainError(f"alternative must be one of {ALTERNATIVES}")

    def to_dict(self) -> dict:
        return asdict(self)


def _vec(a, name="sample") -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite values")
    return a


def _split_by_label(scores, labels):
    s = _vec(scores, "scores")
    lab = np.asarray(labels).ravel()
    if lab.size != s.size:
        raise DomainError("scores and labels differ in length")
    if not np.all((lab == 0) | (lab == 1)):
        raise DomainError("labels must be 0/1")
    pos, neg = s[lab == 1], s[lab == 0]
    if pos.size == 0 or neg.size == 0:
        raise DomainError("both classes must be present")
    return pos, neg


def _pairwise_auc(pos: np.ndarray, neg: np.ndarray) -> float:
    ranks = sps.rankdata(np.concatenate([neg, pos]))
    r_pos = ranks[neg.size :].sum()
    u = r_pos - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def auc(scores, labels) -> float:
    """P(score of a positive > score of a negative), ties counting one half."""
    pos, neg = _split_by_label(scores, labels)
    return _pairwise_auc(pos, neg)


def _p_from_t(t: float, df: float, alternative: str) -> float:
    if alternative == "greater":
        return float(sps.t.sf(t, df))
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))


def brunner_munzel(x, y, alternative: str = "greater", confidence: float = 0.95) -> TestResult:
    """Brunner-Munzel test of ``P(Y > X) + P(Y = X)/2 = 1/2``.

    ``alternative="greater"`` tests against ``y`` being stochastically
    larger. The reported ``auc`` is that probability, with a t-based
    confidence interval. Completely separated samples have zero rank
    variance; the statistic is then taken at its infinite limit.
    """
    if alternative not in ALTERNATIVES:
        raise DomainError(f"alternative must be one of {ALTERNATIVES}")
    x, y = _vec(x, "x"), _vec(y, "y")
    n1, n2 = x.size, y.size
    if n1 < 2 or n2 < 2:
        raise DomainError("each sample needs at least two values")
    ranks = sps.rankdata(np.concatenate([x, y]))
    rx, ry = ranks[:n1], ranks[n1:]
    ix, iy = sps.rankdata(x), sps.rankdata(y)
    mx, my = rx.mean(), ry.mean()
    s1 = np.sum((rx - ix - mx + (n1 + 1) / 2.0) ** 2) / (n1 - 1)
    s2 = np.sum((ry - iy - my + (n2 + 1) / 2.0) ** 2) / (n2 - 1)
    p_hat = float((my - (n2 + 1) / 2.0) / n1)
    v = n1 * s1 + n2 * s2
    if v <= 0:
        if p_hat in (0.0, 1.0):
            stat = math.copysign(math.inf, p_hat - 0.5)
            if alternative == "greater":
                p = 0.0 if stat > 0 else 1.0
            else:
                p = 0.0
            return TestResult(stat, p, p_hat, p_hat, p_hat, alternative, None)
        raise DegenerateError("zero rank variance in both samples")
    stat = float(n1 * n2 * (my - mx) / ((n1 + n2) * math.sqrt(v)))
    df_num = v**2
    df_den = (n1 * s1) ** 2 / (n1 - 1) + (n2 * s2) ** 2 / (n2 - 1)
    df = float(df_num / df_den)
    p = _p_from_t(stat, df, alternative)
    se = math.sqrt(v) / (n1 * n2)
    q = float(sps.t.ppf(0.5 + confidence / 2.0, df))
    lo, hi = max(0.0, p_hat - q * se), min(1.0, p_hat + q * se)
    return TestResult(stat, p, p_hat, lo, hi, alternative, df)


def auc_test_asymptotic(scores, labels, alternative: str = "greater") -> TestResult:
    """Mann-Whitney test on the AUC with the normal limit and a ties correction."""
    pos, neg = _split_by_label(scores, labels)
    n1, n0 = pos.size, neg.size
    n = n1 + n0
    a = _pairwise_auc(pos, neg)
    _, counts = np.unique(np.concatenate([pos, neg]), return_counts=True)
    tie = float(np.sum(counts**3 - counts))
    var_u = n1 * n0 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var_u <= 0:
        raise DegenerateError("all scores tied")
    z = (a - 0.5) * n1 * n0 / math.sqrt(var_u)
    if alternative == "greater":
        p = float(sps.norm.sf(z))
    else:
        p = float(min(1.0, 2.0 * sps.norm.sf(abs(z))))
    return TestResult(float(z), p, a, None, None, alternative)


def accuracy_test(correct: int, n: int, null_rate: float) -> TestResult:
    """One-sided binomial test that held-out accuracy beats ``null_rate``."""
    if n < 1 or not 0 <= correct <= n:
        raise DomainError("need 0 <= correct <= n and n >= 1")
    if not 0.0 < null_rate < 1.0:
        raise DomainError("null rate must lie in (0, 1)")
    p = float(sps.binom.sf(correct - 1, n, null_rate))
    return TestResult(correct / n, min(1.0, p), None, None, None, "greater")


def ks_statistic(x, y) -> float:
    x, y = np.sort(_vec(x, "x")), np.sort(_vec(y, "y"))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def ks_two_sample(x, y) -> TestResult:
    """Two-sample KS with the asymptotic Kolmogorov p-value."""
    x, y = _vec(x, "x"), _vec(y, "y")
    d = ks_statistic(x, y)
    en = x.size * y.size / (x.size + y.size)
    p = float(special.kolmogorov(math.sqrt(en) * d)) if d > 0 else 1.0
    return TestResult(d, min(1.0, max(0.0, p)), None, None, None, "two_sided")


def psi_from_proportions(expected, actual, floor: float = PSI_FLOOR) -> float:
    e = np.maximum(np.asarray(expected, dtype=float), floor)
    a = np.maximum(np.asarray(actual, dtype=float), floor)
    return float(np.sum((a - e) * np.log(a / e)))


def psi(expected, actual, bins: int = 10) -> float:
    """Population stability index on quantile bins of ``expected``."""
    if bins < 2:
        raise DomainError("psi needs at least two bins")
    e, a = _vec(expected, "expected"), _vec(actual, "actual")
    edges = np.quantile(e, np.arange(1, bins) / bins)
    ce = np.bincount(np.searchsorted(edges, e, side="left"), minlength=bins)
    ca = np.bincount(np.searchsorted(edges, a, side="left"), minlength=bins)
    return psi_from_proportions(ce / e.size, ca / a.size)


def wasserstein1(x, y) -> float:
    """Integral of ``|F_x - F_y|`` over the line."""
    x, y = np.sort(_vec(x, "x")), np.sort(_vec(y, "y"))
    grid = np.sort(np.concatenate([x, y]))
    widths = np.diff(grid)
    fx = np.searchsorted(x, grid[:-1], side="right") / x.size
    fy = np.searchsorted(y, grid[:-1], side="right") / y.size
    return float(np.sum(np.abs(fx - fy) * widths))


def ndcg_importance(ref_importances, new_importances) -> float:
    """NDCG of the ranking induced by ``new`` graded by ``ref`` relevance."""
    ref = np.asarray(ref_importances, dtype=float).ravel()
    new = np.asarray(new_importances, dtype=float).ravel()
    if ref.size < 1 or ref.size != new.size:
        raise DomainError("importance vectors must be nonempty and equally long")
    if np.any(ref < 0) or np.any(new < 0):
        raise DomainError("importances must be non-negative")
    discount = 1.0 / np.log2(np.arange(2, ref.size + 2))
    order = np.argsort(-new, kind="stable")
    ideal = float(np.sort(ref)[::-1] @ discount)
    if ideal == 0.0:
        return 1.0
    return float(ref[order] @ discount / ideal)
