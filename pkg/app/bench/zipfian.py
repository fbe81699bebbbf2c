"""
Key choosers for the run phase.

ZipfianGenerator draws rank i in [0, N) with probability
(1 / (i + 1)^theta) / zeta(N, theta), by inverting the exact cumulative
distribution built once from the precomputed pmf. No rejection step.
"""

from typing import Optional

import numpy as np

from ..core import ZipfianState

DEFAULT_THETA = 0.99


def zeta(item_count: int, theta: float) -> float:
    """zeta(N, theta) = sum over i in 1..N of 1 / i^theta."""
    ranks = np.arange(1, item_count + 1, dtype=np.float64)
    return float(np.sum(ranks ** -theta))


def zipf_pmf(item_count: int, theta: float = DEFAULT_THETA) -> np.ndarray:
    weights = np.arange(1, item_count + 1, dtype=np.float64) ** -theta
    return weights / weights.sum()


class ZipfianGenerator:
    """Seeded Zipfian rank sampler; rank 0 is the most popular item."""

    def __init__(self, item_count: int, theta: float = DEFAULT_THETA, seed: Optional[int] = None):
        if item_count < 1:
            raise ValueError("Zipfian generator needs at least one item")
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        self.item_count = item_count
        self.theta = theta
        self.seed = seed
        self.zeta = zeta(item_count, theta)
        self._cdf = np.cumsum(zipf_pmf(item_count, theta))
        self._cdf[-1] = 1.0
        self._rng = np.random.default_rng(seed)

    @property
    def state(self) -> ZipfianState:
        return ZipfianState(item_count=self.item_count, theta=self.theta, zeta=self.zeta, seed=self.seed)

    def next(self) -> int:
        return int(self.next_batch(1)[0])

    def next_batch(self, count: int) -> np.ndarray:
        u = self._rng.random(count)
        ranks = np.searchsorted(self._cdf, u, side="right")
        return np.minimum(ranks, self.item_count - 1)


class UniformGenerator:
    """Uniform rank sampler with the same interface."""

    def __init__(self, item_count: int, seed: Optional[int] = None):
        if item_count < 1:
            raise ValueError("Uniform generator needs at least one item")
        self.item_count = item_count
        self._rng = np.random.default_rng(seed)

    def next(self) -> int:
        return int(self.next_batch(1)[0])

    def next_batch(self, count: int) -> np.ndarray:
        return self._rng.integers(0, self.item_count, size=count)
