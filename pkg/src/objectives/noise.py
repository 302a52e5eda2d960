"""
Noise distributions for contrastive objectives: either an exact density with
a direct sampler, or a frozen model snapshot sampled by Langevin dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from src.exceptions import FrozenModelError, NoiseSpecError
from src.models.base import AnalyticDensity, EnergyModel
from src.numerics import Rng, as_vector
from src.samplers.buffer import ReplayBuffer
from src.samplers.diagnostics import ChainDiagnostics
from src.samplers.langevin import langevin_chain
from src.schemas.sampling import ChainConfig

LOG_2PI = float(np.log(2.0 * np.pi))


class ExactDensity:
    """Adapter giving any analytic density the noise interface."""

    def __init__(self, density: AnalyticDensity, name: str | None = None):
        self.density = density
        self.dim = density.dim
        self.name = name or getattr(density, "name", "exact")

    def log_pdf(self, x: Any) -> np.ndarray:
        return np.atleast_1d(self.density.log_pdf(x))

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        return self.density.sample(n, rng)


class IsotropicGaussianNoise(ExactDensity):
    def __init__(self, mean: Any, std: float):
        self.mean = as_vector(mean, "mean")
        if std <= 0:
            raise ValueError("noise std must be positive")
        self.std = float(std)
        self.dim = self.mean.shape[0]
        self.name = "isotropic_gaussian"

    def log_pdf(self, x: Any) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        z = (X - self.mean) / self.std
        return -0.5 * np.sum(z**2, axis=1) - self.dim * (np.log(self.std) + 0.5 * LOG_2PI)

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        return self.mean + self.std * rng.normal(size=(n, self.dim))


@dataclass
class FrozenModel:
    """Snapshot of the trained model plus the sampler that draws from it."""

    model: EnergyModel
    chain: ChainConfig
    buffer: ReplayBuffer

    def __post_init__(self):
        if not self.model.frozen:
            raise FrozenModelError()

    def draw(self, n: int, rng: Rng) -> tuple[np.ndarray, ChainDiagnostics, np.ndarray]:
        """Langevin from buffer starts; chain endpoints go back into the buffer."""
        starts, from_prior = self.buffer.init_points(n, rng)
        result = langevin_chain(self.model, starts, self.chain, rng)
        self.buffer.push(result.final, rng)
        return result.final, result.diagnostics, from_prior


NoiseSpec = Union[ExactDensity, FrozenModel]


def require_exact(noise: Any) -> ExactDensity:
    if not isinstance(noise, ExactDensity):
        kind = type(noise).__name__
        raise NoiseSpecError(f"objective needs noise with an exact log-pdf, got {kind}")
    return noise


def frozen_energy_model(frozen: Any) -> EnergyModel:
    if isinstance(frozen, FrozenModel):
        return frozen.model
    if isinstance(frozen, EnergyModel):
        return frozen
    raise NoiseSpecError(f"expected a frozen model snapshot, got {type(frozen).__name__}")
