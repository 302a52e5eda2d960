"""
Score-matching objectives: implicit (trace of the Hessian), denoising with a
Gaussian kernel, and sliced with random projections.

Second-order terms are computed from the model's exact Laplacian when it has
one, otherwise by central differences of the score.
"""

from __future__ import annotations

from typing import Any, Literal

import numpy as np

from src.exceptions import DomainError
from src.models.base import EnergyModel
from src.numerics import Rng
from src.objectives.base import GradEstimate, check_batch

SLICED_FD_STEP = 1e-4

ProjectionDist = Literal["rademacher", "gaussian"]


def sm_implicit(model: EnergyModel, data_batch: Any) -> GradEstimate:
    """mean(½‖s(x)‖² + Tr ∇ₓ² log p̃(x)) with s = -∇ₓE."""
    X = check_batch(model, data_batch, "data_batch")
    n = X.shape[0]
    S = model.score(X)
    lap = np.atleast_1d(model.laplacian_log_density(X))
    loss = float(np.mean(0.5 * np.sum(S**2, axis=1) + lap))
    grad = (model.score_vjp(X, S).sum(axis=0) + model.laplacian_param_grad(X).sum(axis=0)) / n
    return GradEstimate(loss_value=loss, grad=grad, batch_sizes={"data": n})


def _perturb(X: np.ndarray, sigma: float, rng: Rng | None, noise: Any) -> np.ndarray:
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    if noise is None:
        if rng is None:
            raise ValueError("an Rng or explicit noise draws are required")
        noise = rng.normal(size=X.shape)
    return np.asarray(noise, dtype=float).reshape(X.shape)


def sm_denoising(
    model: EnergyModel,
    data_batch: Any,
    sigma: float,
    rng: Rng | None = None,
    noise: np.ndarray | None = None,
) -> GradEstimate:
    """
    Conditional form: x̃ = x + σε and target (x - x̃)/σ² = -ε/σ, the score of the
    Gaussian kernel around x.
    """
    X = check_batch(model, data_batch, "data_batch")
    eps = _perturb(X, sigma, rng, noise)
    n = X.shape[0]
    X_tilde = X + sigma * eps
    target = -eps / sigma
    S = model.score(X_tilde)
    resid = S - target
    loss = float(np.mean(0.5 * np.sum(resid**2, axis=1)))
    grad = model.score_vjp(X_tilde, resid).sum(axis=0) / n
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        batch_sizes={"data": n},
        extras={"sigma": float(sigma)},
    )


def dsm_explicit(
    model: EnergyModel,
    smoothed_target: EnergyModel,
    data_batch: Any,
    sigma: float,
    rng: Rng | None = None,
    noise: np.ndarray | None = None,
) -> GradEstimate:
    """
    Explicit form against the exact score of the smoothed data density, evaluated
    at the same perturbed points the conditional form uses. Its gradient agrees
    with the conditional one in expectation.
    """
    X = check_batch(model, data_batch, "data_batch")
    eps = _perturb(X, sigma, rng, noise)
    n = X.shape[0]
    X_tilde = X + sigma * eps
    target = smoothed_target.score(X_tilde)
    resid = model.score(X_tilde) - target
    loss = float(np.mean(0.5 * np.sum(resid**2, axis=1)))
    grad = model.score_vjp(X_tilde, resid).sum(axis=0) / n
    return GradEstimate(loss_value=loss, grad=grad, batch_sizes={"data": n})


def sliced_projections(
    n: int, n_projections: int, dim: int, dist: ProjectionDist, rng: Rng
) -> np.ndarray:
    if n_projections < 1:
        raise DomainError("n_projections must be >= 1")
    shape = (n, n_projections, dim)
    if dist == "rademacher":
        return rng.rademacher(shape)
    if dist == "gaussian":
        return rng.normal(size=shape)
    raise DomainError(f"unknown projection distribution '{dist}'")


def sm_sliced(
    model: EnergyModel,
    data_batch: Any,
    n_projections: int = 1,
    projection_dist: ProjectionDist = "rademacher",
    rng: Rng | None = None,
    projections: np.ndarray | None = None,
) -> GradEstimate:
    """
    mean over data and v of ½(vᵀs)² + vᵀ(∇ₓs)v. The directional second
    derivative is a central difference of the score along v.

    ``projections`` may be passed explicitly with shape (P, d), shared by every
    datum, or (n, P, d).
    """
    X = check_batch(model, data_batch, "data_batch")
    n, d = X.shape
    if projections is None:
        if rng is None:
            raise ValueError("an Rng or explicit projections are required")
        V = sliced_projections(n, n_projections, d, projection_dist, rng)
    else:
        V = np.asarray(projections, dtype=float)
        if V.ndim == 2:
            V = np.broadcast_to(V, (n,) + V.shape)
        if V.ndim != 3 or V.shape[0] != n or V.shape[2] != d:
            raise DomainError(f"projections must have shape (P, {d}) or ({n}, P, {d})")
    P = V.shape[1]
    h = SLICED_FD_STEP

    S = model.score(X)
    loss_total = 0.0
    grad_total = np.zeros(model.n_params)
    for j in range(P):
        v = np.ascontiguousarray(V[:, j, :])
        proj = np.sum(v * S, axis=1)
        s_plus = model.score(X + h * v)
        s_minus = model.score(X - h * v)
        curvature = np.sum(v * (s_plus - s_minus), axis=1) / (2.0 * h)
        loss_total += float(np.sum(0.5 * proj**2 + curvature))
        g = model.score_vjp(X, proj[:, None] * v).sum(axis=0)
        g += (model.score_vjp(X + h * v, v) - model.score_vjp(X - h * v, v)).sum(axis=0) / (2.0 * h)
        grad_total += g

    m = n * P
    return GradEstimate(
        loss_value=loss_total / m,
        grad=grad_total / m,
        batch_sizes={"data": n, "projections": P},
        extras={"projection_dist": projection_dist if projections is None else "explicit"},
    )
