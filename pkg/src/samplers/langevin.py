"""
Unadjusted Langevin dynamics and its Metropolis-adjusted variant.

Chains run in lock-step: ``init`` of shape ``(n, d)`` advances ``n`` chains
with one vectorised score evaluation per step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from src.config import settings
from src.exceptions import ConfigurationError, SamplerDivergedError
from src.logging_config import get_logger
from src.models.base import EnergyModel
from src.numerics import Rng
from src.samplers.diagnostics import ChainDiagnostics
from src.schemas.sampling import ChainConfig

logger = get_logger(__name__)


@dataclass
class LangevinResult:
    final: np.ndarray
    path: np.ndarray
    diagnostics: ChainDiagnostics
    path_steps: list[int]


def _checked_score(model: EnergyModel, X: np.ndarray, step: int, nu_history: list[float]):
    if not np.all(np.isfinite(X)):
        raise SamplerDivergedError(step, nu_history, reason="non-finite chain state")
    S = model.score(X)
    norms = np.linalg.norm(S, axis=1)
    if not np.all(np.isfinite(norms)) or np.max(norms) > settings.DIVERGENCE_SCORE_LIMIT:
        raise SamplerDivergedError(step, nu_history)
    return S, norms


def _log_q(x_to: np.ndarray, x_from: np.ndarray, s_from: np.ndarray, tau: float, std: float):
    mean = x_from + 0.5 * tau * s_from
    return -0.5 * np.sum((x_to - mean) ** 2, axis=1) / std**2


def langevin_chain(model: EnergyModel, init: Any, cfg: ChainConfig, rng: Rng) -> LangevinResult:
    """
    x_{k+1} = x_k + (τ/2) score(x_k) + σ ε with σ = √τ (matched) or ``noise_scale``
    (decoupled). The path keeps every ``thin``-th state plus the final one.
    """
    X0 = np.asarray(init, dtype=float)
    single = X0.ndim == 1
    X = np.atleast_2d(X0).copy()
    if X.shape[1] != model.dim:
        raise ConfigurationError(f"init has dimension {X.shape[1]}, model has {model.dim}")

    tau = cfg.step_size
    std = cfg.noise_std
    adjust = cfg.metropolis_adjust and std > 0.0
    if cfg.metropolis_adjust and std == 0.0:
        logger.warning("Metropolis adjustment ignored for a noiseless chain")

    nu_history: list[float] = []
    energies: list[float] = []
    path = [X.copy()]
    path_steps = [0]
    accepted = 0
    proposed = 0

    S, norms = _checked_score(model, X, 0, nu_history)
    E = np.atleast_1d(model.energy(X))
    for k in range(cfg.steps):
        nu_history.append(float(norms.mean()))
        energies.append(float(E.mean()))
        noise = rng.normal(size=X.shape)
        proposal = X + 0.5 * tau * S + std * noise
        S_new, norms_new = _checked_score(model, proposal, k + 1, nu_history)
        E_new = np.atleast_1d(model.energy(proposal))
        if adjust:
            log_alpha = (
                E - E_new
                + _log_q(X, proposal, S_new, tau, std)
                - _log_q(proposal, X, S, tau, std)
            )
            accept = np.log(rng.uniform(size=X.shape[0])) < log_alpha
            proposed += X.shape[0]
            accepted += int(accept.sum())
            X = np.where(accept[:, None], proposal, X)
            S = np.where(accept[:, None], S_new, S)
            norms = np.where(accept, norms_new, norms)
            E = np.where(accept, E_new, E)
        else:
            X, S, norms, E = proposal, S_new, norms_new, E_new
        if (k + 1) % cfg.thin == 0 or k + 1 == cfg.steps:
            path.append(X.copy())
            path_steps.append(k + 1)

    nu_history.append(float(norms.mean()))
    energies.append(float(E.mean()))
    acceptance = accepted / proposed if adjust and proposed else 1.0
    diagnostics = ChainDiagnostics(
        acceptance_rate=acceptance,
        nu=float(np.mean(nu_history)),
        energies=energies,
        nu_history=nu_history,
    )
    P = np.stack(path)
    if single:
        return LangevinResult(X[0], P[:, 0, :], diagnostics, path_steps)
    return LangevinResult(X, P, diagnostics, path_steps)


def long_run_samples(
    model: EnergyModel, init: Any, cfg: ChainConfig, rng: Rng, burn_in: int = 0
) -> np.ndarray:
    """Thinned path states after ``burn_in`` steps, flattened over chains."""
    result = langevin_chain(model, init, cfg, rng)
    keep = [i for i, s in enumerate(result.path_steps) if s > burn_in]
    return result.path[keep].reshape(-1, model.dim)
