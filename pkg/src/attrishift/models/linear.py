"""Least squares, ridge and L2-regularized logistic regression."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, NumericError, RankDeficiencyError


def fit_ridge(x: np.ndarray, y: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    """Solve the normal equations with an unpenalized intercept.

    Centering first is algebraically the same as appending a column of ones
    and leaving its diagonal entry unpenalized.
    """
    n, p = x.shape
    x_mean = x.mean(axis=0)
    y_mean = float(y.mean())
    xc = x - x_mean
    gram = xc.T @ xc
    if lam == 0.0:
        if p > 0 and np.linalg.matrix_rank(xc) < p:
            raise RankDeficiencyError("design matrix is rank deficient; use ridge with lam > 0")
    gram = gram + lam * np.eye(p)
    try:
        coef = np.linalg.solve(gram, xc.T @ (y - y_mean))
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(str(exc)) from None
    return coef, y_mean - float(x_mean @ coef)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _log1pexp(t):
    return np.logaddexp(0.0, t)


def logistic_objective(x, y, coef, intercept, lam) -> float:
    t = x @ coef + intercept
    return float(np.sum(_log1pexp(t) - y * t) + 0.5 * lam * coef @ coef)


def fit_logistic(x: np.ndarray, y: np.ndarray, lam: float, max_iter: int, tol: float):
    """Damped Newton on ``sum(log-loss) + lam/2 * ||coef||^2``.

    Returns ``(coef, intercept, history)`` where ``history`` holds the
    objective after every accepted step.
    """
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("logistic regression needs a {0, 1} target")
    n, p = x.shape
    design = np.column_stack([x, np.ones(n)])
    penalty = np.full(p + 1, lam)
    penalty[-1] = 0.0
    w = np.zeros(p + 1)
    ybar = y.mean()
    if 0 < ybar < 1:
        w[-1] = np.log(ybar / (1 - ybar))

    def objective(w):
        t = design @ w
        return float(np.sum(_log1pexp(t) - y * t) + 0.5 * np.sum(penalty * w * w))

    f = objective(w)
    history = [f]
    for _ in range(max_iter):
        t = design @ w
        mu = _sigmoid(t)
        grad = design.T @ (mu - y) + penalty * w
        if np.linalg.norm(grad) <= tol:
            break
        h = mu * (1 - mu)
        hess = (design * h[:, None]).T @ design + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess + 1e-10 * np.eye(p + 1), grad, rcond=None)[0]
        scale = 1.0
        for _halving in range(60):
            cand = w - scale * step
            f_new = objective(cand)
            if f_new <= f:
                break
            scale *= 0.5
        else:
            break  # no descent possible at machine precision
        if not np.isfinite(f_new):
            raise NumericError("logistic regression diverged")
        improvement = f - f_new
        w, f = cand, f_new
        history.append(f)
        if improvement <= 1e-15 * max(1.0, abs(f)) and scale < 1.0:
            break
    return w[:p].copy(), float(w[p]), history
