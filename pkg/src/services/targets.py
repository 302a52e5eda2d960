"""
Builders turning run configuration sections into target densities and trainable models.
"""

from __future__ import annotations

from typing import Any, cast

import numpy as np

from src.exceptions import ConfigurationError
from src.logging_config import get_logger
from src.models import AnalyticGaussianEnergy, EnergyModel, GaussianMixtureEnergy, MlpEnergy
from src.numerics import Rng
from src.schemas.run import ModelConfig, TargetConfig

logger = get_logger(__name__)

Target = AnalyticGaussianEnergy | GaussianMixtureEnergy

_TARGET_KEYS: dict[str, set[str]] = {
    "gaussian": {"mean", "std", "cov"},
    "two_modes_1d": {"separation", "std", "weight"},
    "four_modes": {"radius", "std"},
    "mixture": {"weights", "means", "stds"},
}


def build_target(cfg: TargetConfig) -> Target:
    params = dict(cfg.parameters)
    unknown = set(params) - _TARGET_KEYS[cfg.name]
    if unknown:
        raise ConfigurationError(f"target '{cfg.name}' does not accept {sorted(unknown)}")
    try:
        target = _build(cfg.name, params)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid parameters for target '{cfg.name}': {e}") from e
    logger.debug("Target built", target=cfg.name, dim=target.dim)
    return cast(Target, target.snapshot())


def _build(name: str, params: dict[str, Any]) -> Target:
    if name == "gaussian":
        mean = np.atleast_1d(np.asarray(params.get("mean", [0.0]), dtype=float))
        if "cov" in params:
            return AnalyticGaussianEnergy.from_covariance(mean, params["cov"], name="gaussian")
        std = float(params.get("std", 1.0))
        if std <= 0:
            raise ValueError("std must be positive")
        return AnalyticGaussianEnergy.from_covariance(mean, np.eye(mean.shape[0]) * std**2)
    if name == "two_modes_1d":
        return GaussianMixtureEnergy.two_modes_1d(
            separation=float(params.get("separation", 2.0)),
            std=float(params.get("std", 0.5)),
            weight=float(params.get("weight", 0.5)),
        )
    if name == "four_modes":
        return GaussianMixtureEnergy.four_modes(
            radius=float(params.get("radius", 2.0)), std=float(params.get("std", 0.5))
        )
    weights = np.asarray(params["weights"], dtype=float)
    means = np.asarray(params["means"], dtype=float)
    if means.ndim == 1:
        means = means[:, None]
    stds = np.asarray(params.get("stds", 1.0), dtype=float)
    if stds.ndim == 1:
        stds = stds[:, None]
    stds = np.broadcast_to(stds, means.shape)
    return GaussianMixtureEnergy(weights, means, np.square(stds), name="mixture")


def build_model(cfg: ModelConfig, dim: int, rng: Rng) -> EnergyModel:
    if cfg.kind == "mlp":
        widths = cfg.widths or [dim, 64, 64, 1]
        if widths[0] != dim:
            raise ConfigurationError(
                f"model.widths starts with {widths[0]}, target dimension is {dim}"
            )
        return MlpEnergy(
            widths,
            rng=rng,
            leaky_slope=cfg.leaky_slope,
            spectral_norm=cfg.spectral_norm,
            power_iters=cfg.power_iters,
            activation=cfg.activation,
        )
    if cfg.kind == "gaussian":
        return AnalyticGaussianEnergy.standard(dim)
    k = cfg.n_components
    means = rng.normal(size=(k, dim))
    return GaussianMixtureEnergy(np.full(k, 1.0 / k), means, np.ones((k, dim)))
