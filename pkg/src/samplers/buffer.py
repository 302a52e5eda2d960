"""
Persistent replay buffer for Langevin chain starts, with noise rejuvenation.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from src.exceptions import DimensionMismatchError, NonFiniteError
from src.logging_config import get_logger
from src.numerics import Rng, as_vector

logger = get_logger(__name__)


class Prior(ABC):
    dim: int
    name: str

    @abstractmethod
    def sample(self, n: int, rng: Rng) -> np.ndarray: ...


class UniformBoxPrior(Prior):
    name = "uniform_box"

    def __init__(self, lo: Any, hi: Any):
        self.lo = as_vector(lo, "lo")
        self.hi = as_vector(hi, "hi")
        if self.lo.shape != self.hi.shape or np.any(self.lo >= self.hi):
            raise ValueError("box prior needs lo < hi in every coordinate")
        self.dim = self.lo.shape[0]

    @classmethod
    def from_data(cls, data: Any, margin: float = 0.0) -> "UniformBoxPrior":
        X = np.atleast_2d(np.asarray(data, dtype=float))
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = np.maximum(hi - lo, 1e-6)
        return cls(lo - margin * span, hi + margin * span)

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))


class GaussianPrior(Prior):
    name = "gaussian"

    def __init__(self, mean: Any, std: Any):
        self.mean = as_vector(mean, "mean")
        self.std = np.broadcast_to(np.asarray(std, dtype=float), self.mean.shape).copy()
        self.dim = self.mean.shape[0]

    @classmethod
    def from_data(cls, data: Any, margin: float = 0.0) -> "GaussianPrior":
        X = np.atleast_2d(np.asarray(data, dtype=float))
        return cls(X.mean(axis=0), X.std(axis=0) * (1.0 + margin) + 1e-6)

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        return self.mean + self.std * rng.normal(size=(n, self.dim))


def prior_from_data(kind: str, data: Any, margin: float = 0.0) -> Prior:
    if kind == "uniform_box":
        return UniformBoxPrior.from_data(data, margin)
    if kind == "gaussian":
        return GaussianPrior.from_data(data, margin)
    raise ValueError(f"unknown prior '{kind}'")


class ReplayBuffer:
    """
    Fixed-capacity store of past chain endpoints. When full, each pushed point
    overwrites a uniformly chosen slot.
    """

    def __init__(
        self, dim: int, prior: Prior, capacity: int = 10000, rejuvenation_rate: float = 0.25
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 <= rejuvenation_rate <= 1.0:
            raise ValueError("rejuvenation_rate must lie in [0, 1]")
        if prior.dim != dim:
            raise DimensionMismatchError(f"prior has dimension {prior.dim}, buffer {dim}")
        self.dim = int(dim)
        self.prior = prior
        self.capacity = int(capacity)
        self.rejuvenation_rate = float(rejuvenation_rate)
        self._store = np.empty((self.capacity, self.dim))
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def points(self) -> np.ndarray:
        return self._store[: self._size].copy()

    def clear(self) -> None:
        self._size = 0

    def push(self, points: Any, rng: Rng) -> None:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"pushed points have dimension {P.shape[1]}, buffer {self.dim}"
            )
        if not np.all(np.isfinite(P)):
            raise NonFiniteError("refusing to store non-finite chain states")
        for row in P:
            if self._size < self.capacity:
                self._store[self._size] = row
                self._size += 1
            else:
                self._store[int(rng.integers(0, self.capacity))] = row

    def init_points(self, n: int, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
        """
        ``n`` chain starts and a boolean mask marking the ones drawn from the prior.
        Each start comes from the prior with probability ``rejuvenation_rate``.
        """
        if self._size == 0:
            if self.rejuvenation_rate < 1.0:
                logger.warning("Replay buffer empty, drawing all starts from prior", n=n)
            return self.prior.sample(n, rng), np.ones(n, dtype=bool)

        from_prior = rng.uniform(size=n) < self.rejuvenation_rate
        idx = rng.integers(0, self._size, size=n)
        out = self._store[idx].copy()
        n_prior = int(from_prior.sum())
        if n_prior:
            out[from_prior] = self.prior.sample(n_prior, rng)
        logger.debug("Buffer starts drawn", n=n, from_prior=n_prior, from_buffer=n - n_prior)
        return out, from_prior
