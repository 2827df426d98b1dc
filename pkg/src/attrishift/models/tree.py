"""CART trees and gradient boosting.

Trees are stored as flat node arrays. A row goes to the left child when
``x[feature] < threshold``. ``cover`` is the number of training rows that
reached the node, which the path-dependent attribution needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, MalformedTreeError

LEAF = -1


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    def __post_init__(self):
        for name, dtype in (("feature", int), ("left", int), ("right", int), ("threshold", float), ("value", float), ("cover", float)):
            a = np.asarray(getattr(self, name), dtype=dtype).copy()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=int)
        active = ~self.is_leaf_array(node)
        while np.any(active):
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = x[idx, self.feature[nd]] < self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] != LEAF
        return self.value[node]

    def is_leaf_array(self, nodes: np.ndarray) -> np.ndarray:
        return self.feature[nodes] == LEAF

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f != LEAF}

    def expected_value(self) -> float:
        leaves = self.feature == LEAF
        return float(np.sum(self.value[leaves] * self.cover[leaves]) / self.cover[0])

    def validate(self) -> None:
        for j in range(self.n_nodes):
            if self.feature[j] == LEAF:
                if not np.isfinite(self.value[j]):
                    raise MalformedTreeError(f"leaf {j} has a non-finite value")
                continue
            if self.cover[j] <= 0:
                raise MalformedTreeError(f"internal node {j} has zero cover")
            l, r = self.left[j], self.right[j]
            if abs(self.cover[l] + self.cover[r] - self.cover[j]) > 1e-9 * self.cover[j]:
                raise MalformedTreeError(f"node {j}: child covers do not add up")

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value", "cover")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(**{k: np.asarray(v) for k, v in d.items()})


def _best_split(x, target, orders, min_leaf, criterion):
    """Best (gain, feature, threshold) over all features, or None.

    ``orders[f]`` lists the node's rows sorted by feature ``f``. Ties keep the
    lowest feature index, then the lowest threshold.
    """
    m = orders[0].size
    lo, hi = min_leaf - 1, m - min_leaf - 1
    if hi < lo:
        return None
    n_left = np.arange(1, m)
    n_right = m - n_left
    best = None
    for f, order in enumerate(orders):
        xs = x[order, f]
        ts = target[order]
        # candidate cut after position k (left = first k+1 rows)
        valid = np.zeros(m - 1, dtype=bool)
        valid[lo : hi + 1] = True
        valid &= xs[1:] > xs[:-1]
        if not valid.any():
            continue
        s = np.cumsum(ts)[:-1]
        total = s[-1] + ts[-1]
        if criterion == "mse":
            # SSE reduction = s_l^2/n_l + s_r^2/n_r - total^2/m
            gain = s**2 / n_left + (total - s) ** 2 / n_right - total**2 / m
        else:
            gini_parent = m * (1 - (total / m) ** 2 - (1 - total / m) ** 2)
            pl = s / n_left
            pr = (total - s) / n_right
            gain = gini_parent - (n_left * 2 * pl * (1 - pl) + n_right * 2 * pr * (1 - pr))
        gain = np.where(valid, gain, -np.inf)
        k = int(np.argmax(gain))
        g = gain[k]
        if np.isfinite(g) and (best is None or g > best[0]):
            best = (float(g), f, 0.5 * (xs[k] + xs[k + 1]))
    return best


def presort(x: np.ndarray) -> list[np.ndarray]:
    return [np.argsort(x[:, f], kind="stable") for f in range(x.shape[1])]


def fit_tree(x: np.ndarray, target: np.ndarray, max_depth: int, min_leaf: int, criterion: str = "mse", leaf_values=None, orders=None, fitted_out=None) -> Tree:
    """Greedy CART.

    ``criterion`` is ``"mse"`` (variance reduction) or ``"gini"``. Leaf values
    are target means unless ``leaf_values(idx)`` is given. ``orders`` may
    carry :func:`presort` output when the same ``x`` is reused, and
    ``fitted_out`` receives the training-row predictions.
    """
    feature, threshold, left, right, value, cover = [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0.0), (cover, 0.0)):
            lst.append(v)
        return len(feature) - 1

    n = x.shape[0]
    root_orders = presort(x) if orders is None else orders
    mask = np.zeros(n, dtype=bool)
    stack = [(root_orders, 0, new_node())]
    while stack:
        orders, depth, node = stack.pop()
        idx = orders[0] if orders else np.arange(n)
        cover[node] = float(idx.size)
        value[node] = float(leaf_values(idx)) if leaf_values is not None else float(target[idx].mean())
        if fitted_out is not None:
            fitted_out[idx] = value[node]  # children overwrite
        if depth >= max_depth or idx.size < 2 * min_leaf or not orders:
            continue
        t = target[idx]
        if np.all(t == t[0]):
            continue
        split = _best_split(x, target, orders, min_leaf, criterion)
        if split is None or split[0] <= 1e-12 * max(1.0, float(np.sum(t * t))):
            continue
        _, f, thr = split
        mask[idx] = x[idx, f] < thr
        left_orders = [o[mask[o]] for o in orders]
        right_orders = [o[~mask[o]] for o in orders]
        l, r = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, thr, l, r
        # push right first so the left subtree is numbered first
        stack.append((right_orders, depth + 1, r))
        stack.append((left_orders, depth + 1, l))

    return Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), np.array(value), np.array(cover))


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def fit_gbdt(x, y, n_trees: int, learning_rate: float, max_depth: int, min_leaf: int, task: str):
    """Boosted regression trees. Returns ``(base_score, trees, train_loss_history)``."""
    if task == "classification":
        if not np.all((y == 0) | (y == 1)):
            raise DomainError("classification target must be in {0, 1}")
        p = np.clip(y.mean(), 1e-12, 1 - 1e-12)
        base = float(np.log(p / (1 - p)))
    else:
        base = float(y.mean())
    raw = np.full(y.shape[0], base)
    trees, history = [], []

    def loss(raw):
        if task == "classification":
            return float(np.mean(np.logaddexp(0.0, raw) - y * raw))
        return float(np.mean((y - raw) ** 2))

    history.append(loss(raw))
    orders = presort(x)
    fitted = np.empty(y.shape[0])
    for _ in range(n_trees):
        if task == "classification":
            prob = _sigmoid(raw)
            resid = y - prob
            hess = prob * (1 - prob)

            def newton(idx, resid=resid, hess=hess):
                return resid[idx].sum() / max(hess[idx].sum(), 1e-12)

            tree = fit_tree(x, resid, max_depth, min_leaf, "mse", leaf_values=newton, orders=orders, fitted_out=fitted)
        else:
            resid = y - raw
            tree = fit_tree(x, resid, max_depth, min_leaf, "mse", orders=orders, fitted_out=fitted)
        trees.append(tree)
        raw = raw + learning_rate * fitted
        history.append(loss(raw))
    return base, trees, history
