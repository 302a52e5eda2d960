"""
Noise-contrastive objectives against a fixed noise distribution: binary NCE
with a learnable log-partition ``c``, ranking NCE over collections, and
conditional NCE with Gaussian perturbations.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from src.exceptions import DimensionMismatchError, DomainError
from src.models.base import EnergyModel
from src.numerics import Rng, logsumexp, sigmoid, softplus
from src.objectives.base import GradEstimate, check_batch
from src.objectives.noise import require_exact


def _nce_logits(
    model: EnergyModel, c: float, noise: Any, X: np.ndarray, log_v: float
) -> np.ndarray:
    return log_v - np.atleast_1d(model.energy(X)) - c - noise.log_pdf(X)


def nce_binary(
    model: EnergyModel,
    c: float,
    noise: Any,
    data_batch: Any,
    noise_batch: Any,
    v: float = 1.0,
) -> GradEstimate:
    noise = require_exact(noise)
    if v <= 0:
        raise DomainError("noise ratio v must be positive")
    Xd = check_batch(model, data_batch, "data_batch")
    Xn = check_batch(model, noise_batch, "noise_batch")
    nd, nn = Xd.shape[0], Xn.shape[0]
    log_v = float(np.log(v))

    z_d = _nce_logits(model, c, noise, Xd, log_v)
    z_n = _nce_logits(model, c, noise, Xn, log_v)
    loss = float(np.mean(softplus(z_n)) + np.mean(softplus(-z_d)))

    s_n = sigmoid(z_n)
    s_d = sigmoid(-z_d)
    grad = model.weighted_param_grad(Xn, -s_n / nn) + model.weighted_param_grad(Xd, s_d / nd)
    grad_c = float(-np.mean(s_n) + np.mean(s_d))
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        grad_c=grad_c,
        batch_sizes={"data": nd, "noise": nn},
        extras={"data_posterior": float(np.mean(sigmoid(z_d)))},
    )


def _check_rho(rho: Any, L: int) -> np.ndarray:
    r = np.asarray(rho, dtype=float).reshape(-1)
    if r.shape[0] != L:
        raise DomainError(f"class probabilities have length {r.shape[0]}, collections have {L}")
    if np.any(r <= 0) or not np.all(np.isfinite(r)) or abs(float(r.sum()) - 1.0) > 1e-9:
        raise DomainError("class probabilities must be positive and sum to 1")
    return r


def _rank_logits(model: EnergyModel, c: float, noise: Any, C: np.ndarray, rho: np.ndarray):
    n, L, d = C.shape
    flat = C.reshape(n * L, d)
    log_ratio = -np.atleast_1d(model.energy(flat)) - c - noise.log_pdf(flat)
    return np.log(rho)[None, :] + log_ratio.reshape(n, L)


def _check_collections(model: EnergyModel, collections: Any) -> np.ndarray:
    C = np.asarray(collections, dtype=float)
    if C.ndim != 3 or C.shape[2] != model.dim:
        raise DimensionMismatchError(
            f"collections must have shape (N, L, {model.dim}), got {C.shape}"
        )
    return C


def rank_posterior(
    model: EnergyModel, c: float, noise: Any, collections: Any, class_probs: Any
) -> np.ndarray:
    """Softmax over ρ_i p(x_i) / p_n(x_i) within each collection, shape (N, L)."""
    noise = require_exact(noise)
    C = _check_collections(model, collections)
    rho = _check_rho(class_probs, C.shape[1])
    ell = _rank_logits(model, c, noise, C, rho)
    return np.exp(ell - logsumexp(ell, axis=1, keepdims=True))


def nce_rank(
    model: EnergyModel,
    c: float,
    noise: Any,
    collections: Any,
    class_probs: Any,
    data_index: int = 0,
) -> GradEstimate:
    """
    Cross-entropy of the ranking posterior; element ``data_index`` is the observed one.

    ``grad_c`` is always 0.0: ``c`` shifts every logit in a collection equally and
    cancels in the softmax, so ranking cannot learn the log partition.
    """
    noise = require_exact(noise)
    C = _check_collections(model, collections)
    n, L, d = C.shape
    rho = _check_rho(class_probs, L)
    if not 0 <= data_index < L:
        raise DomainError(f"data_index {data_index} outside a collection of size {L}")

    ell = _rank_logits(model, c, noise, C, rho)
    log_post = ell - logsumexp(ell, axis=1, keepdims=True)
    loss = float(-np.mean(log_post[:, data_index]))

    post = np.exp(log_post)
    onehot = np.zeros(L)
    onehot[data_index] = 1.0
    weights = (-(post - onehot[None, :]) / n).reshape(-1)
    grad = model.weighted_param_grad(C.reshape(n * L, d), weights)
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        grad_c=0.0,
        batch_sizes={"collections": n, "collection_size": L},
        extras={"data_posterior": float(np.mean(post[:, data_index]))},
    )


def rank_pair_binary_posterior(
    model: EnergyModel, c: float, noise: Any, pairs: Any, data_index: int = 0
) -> np.ndarray:
    """
    Binary posterior (v = 1) that a pair was generated as (data, noise) rather
    than (noise, data), using the joint densities p(x_a) p_n(x_b) and p_n(x_a) p(x_b).
    """
    noise = require_exact(noise)
    P = _check_collections(model, pairs)
    if P.shape[1] != 2:
        raise DomainError("pairs must have exactly two elements")
    a, b = P[:, data_index], P[:, 1 - data_index]
    log_model = (-np.atleast_1d(model.energy(a)) - c) + noise.log_pdf(b)
    log_noise = noise.log_pdf(a) + (-np.atleast_1d(model.energy(b)) - c)
    return sigmoid(log_model - log_noise)


def cnce(
    model: EnergyModel,
    data_batch: Any,
    sigma: float,
    kappa: int = 1,
    v: float = 1.0,
    rng: Rng | None = None,
    perturbations: np.ndarray | None = None,
) -> GradEstimate:
    """
    Conditional NCE with y ~ N(x, σ² I). The symmetric kernel cancels, so the
    posterior of the ordered tuple (x, y) is σ(E(y) - E(x) - log v); the loss
    averages both orderings.
    """
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if kappa < 1 or v <= 0:
        raise DomainError("kappa must be >= 1 and v positive")
    Xd = check_batch(model, data_batch, "data_batch")
    X = np.repeat(Xd, kappa, axis=0)
    if perturbations is None:
        if rng is None:
            raise ValueError("an Rng or explicit perturbations are required")
        perturbations = rng.normal(size=X.shape)
    eps = np.asarray(perturbations, dtype=float).reshape(X.shape)
    Y = X + sigma * eps
    m = X.shape[0]
    log_v = float(np.log(v))

    delta = np.atleast_1d(model.energy(Y)) - np.atleast_1d(model.energy(X))
    u1 = delta - log_v
    u2 = delta + log_v
    loss = float(0.5 * np.mean(softplus(-u1) + softplus(-u2)))

    w = 0.5 * (sigmoid(-u1) + sigmoid(-u2)) / m
    grad = model.weighted_param_grad(Y, -w) + model.weighted_param_grad(X, w)
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        batch_sizes={"data": Xd.shape[0], "pairs": m},
        extras={"posterior": float(np.mean(sigmoid(u1)))},
    )
