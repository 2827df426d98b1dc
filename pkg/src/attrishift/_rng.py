"""Seeded randomness.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox generator. Gaussian draws use Box-Muller on
Philox uniforms instead of numpy's ziggurat so the transform is pinned.
"""
from __future__ import annotations

import numpy as np


class Rng:
    """Philox-backed generator with a fixed Gaussian transform."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return low + (high - low) * self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None) -> np.ndarray:
        shape = (size,) if isinstance(size, (int, np.integer)) else size
        count = 1 if shape is None else int(np.prod(shape))
        half = (count + 1) // 2
        u1 = self._gen.random(half)
        u2 = self._gen.random(half)
        # 1 - u keeps the log argument in (0, 1]
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        theta = 2.0 * np.pi * u2
        z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])[:count]
        z = loc + scale * z
        return float(z[0]) if shape is None else z.reshape(shape)

    def multivariate_normal(self, mean, cov, size: int) -> np.ndarray:
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        chol = np.linalg.cholesky(cov)
        z = self.normal(size=(size, mean.size))
        return mean + z @ chol.T

    def bernoulli(self, p, size=None) -> np.ndarray:
        return (self._gen.random(size) < p).astype(float)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def make_rng(seed: int) -> Rng:
    return Rng(seed)


def derive_seeds(seed: int, count: int) -> list[int]:
    """Child seeds that depend only on ``(seed, count)``'s prefix, never on call order."""
    state = np.random.SeedSequence(int(seed)).generate_state(count, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in state]
