"""
Self-adapting contrastive objectives, where the noise is a frozen snapshot of the
model itself, and Bregman ratio matching against either a fixed noise density or
such a snapshot.

Both families share one core: a log density ratio ℓ per point, turned into a loss
mean_noise S0(g) - mean_data S1(g) with g = exp(ℓ), and per-point weights
S0'(g) g and S1'(g) g on ∇θℓ = -∇θE.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from src.config import settings
from src.exceptions import RatioOverflowError
from src.models.base import EnergyModel
from src.numerics import log_sigmoid, sigmoid, softplus
from src.objectives.base import GradEstimate, check_batch, check_frozen
from src.objectives.noise import frozen_energy_model, require_exact
from src.objectives.spairs import SPair


def adance_loss_from_energies(
    e_theta_data: Any, e_frozen_data: Any, e_theta_noise: Any, e_frozen_noise: Any
) -> float:
    """Class-posterior cross-entropy from raw energies; depends on energy differences only."""
    ell_d = np.asarray(e_frozen_data, dtype=float) - np.asarray(e_theta_data, dtype=float)
    ell_n = np.asarray(e_frozen_noise, dtype=float) - np.asarray(e_theta_noise, dtype=float)
    return float(np.mean(softplus(ell_n)) - np.mean(log_sigmoid(ell_d)))


def adance(model: EnergyModel, frozen: Any, data_batch: Any, noise_batch: Any) -> GradEstimate:
    """
    Noise samples come from the frozen model; both classes use unnormalised
    densities with equal priors, so the posterior of "data" is σ(E_m - E_θ).
    """
    snapshot = frozen_energy_model(frozen)
    check_frozen(model, snapshot)
    Xd = check_batch(model, data_batch, "data_batch")
    Xn = check_batch(model, noise_batch, "noise_batch")
    nd, nn = Xd.shape[0], Xn.shape[0]

    e_td = np.atleast_1d(model.energy(Xd))
    e_md = np.atleast_1d(snapshot.energy(Xd))
    e_tn = np.atleast_1d(model.energy(Xn))
    e_mn = np.atleast_1d(snapshot.energy(Xn))
    loss = adance_loss_from_energies(e_td, e_md, e_tn, e_mn)

    w_n = sigmoid(e_mn - e_tn)
    w_d = sigmoid(e_td - e_md)
    grad = model.weighted_param_grad(Xn, -w_n / nn) + model.weighted_param_grad(Xd, w_d / nd)
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        batch_sizes={"data": nd, "noise": nn},
        extras={"data_posterior": float(np.mean(sigmoid(e_md - e_td)))},
    )


def _ratio_terms(
    spair: SPair, ell: np.ndarray, X: np.ndarray, side: str
) -> tuple[np.ndarray, np.ndarray]:
    """(S(g), S'(g) g) for the noise (S0) or data (S1) side."""
    if spair.log_domain:
        if side == "noise":
            return spair.s0_log(ell), spair.w0_log(ell)  # type: ignore[misc]
        return spair.s1_log(ell), spair.w1_log(ell)  # type: ignore[misc]

    limit = float(np.log(settings.RATIO_OVERFLOW_LIMIT))
    worst = int(np.argmax(ell))
    if ell[worst] > limit:
        raise RatioOverflowError(X[worst].tolist(), float(ell[worst]))
    g = np.exp(np.clip(ell, -settings.EXP_CLAMP, settings.EXP_CLAMP))
    if side == "noise":
        return spair.s0(g), spair.ds0(g) * g
    return spair.s1(g), spair.ds1(g) * g


def ratio_matching(
    model: EnergyModel,
    spair: SPair,
    ell_data: np.ndarray,
    ell_noise: np.ndarray,
    Xd: np.ndarray,
    Xn: np.ndarray,
) -> tuple[float, np.ndarray, float, np.ndarray, np.ndarray]:
    """Loss, θ-gradient and ∂/∂ℓ-offset gradient, plus the raw weights per side."""
    nd, nn = Xd.shape[0], Xn.shape[0]
    s0, w0 = _ratio_terms(spair, ell_noise, Xn, "noise")
    s1, w1 = _ratio_terms(spair, ell_data, Xd, "data")
    loss = float(np.mean(s0) - np.mean(s1))
    grad = model.weighted_param_grad(Xn, -w0 / nn) + model.weighted_param_grad(Xd, w1 / nd)
    grad_offset = float(-np.mean(w0) + np.mean(w1))
    return loss, grad, grad_offset, w0, w1


def brm(
    model: EnergyModel,
    c: float,
    noise: Any,
    spair: SPair,
    data_batch: Any,
    noise_batch: Any,
) -> GradEstimate:
    """Bregman ratio matching with g = exp(-E - c) / p_n."""
    noise = require_exact(noise)
    Xd = check_batch(model, data_batch, "data_batch")
    Xn = check_batch(model, noise_batch, "noise_batch")
    ell_d = -np.atleast_1d(model.energy(Xd)) - c - noise.log_pdf(Xd)
    ell_n = -np.atleast_1d(model.energy(Xn)) - c - noise.log_pdf(Xn)
    loss, grad, grad_c, _, _ = ratio_matching(model, spair, ell_d, ell_n, Xd, Xn)
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        grad_c=grad_c,
        batch_sizes={"data": Xd.shape[0], "noise": Xn.shape[0]},
        extras={"spair": spair.name},
    )


def adabrm(
    model: EnergyModel, frozen: Any, spair: SPair, data_batch: Any, noise_batch: Any
) -> GradEstimate:
    """Ratio matching against the frozen snapshot: g = exp(E_m - E_θ)."""
    snapshot = frozen_energy_model(frozen)
    check_frozen(model, snapshot)
    Xd = check_batch(model, data_batch, "data_batch")
    Xn = check_batch(model, noise_batch, "noise_batch")
    ell_d = np.atleast_1d(snapshot.energy(Xd)) - np.atleast_1d(model.energy(Xd))
    ell_n = np.atleast_1d(snapshot.energy(Xn)) - np.atleast_1d(model.energy(Xn))
    loss, grad, _, w0, w1 = ratio_matching(model, spair, ell_d, ell_n, Xd, Xn)
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        batch_sizes={"data": Xd.shape[0], "noise": Xn.shape[0]},
        extras={"spair": spair.name, "mean_noise_weight": float(np.mean(w0))},
    )
