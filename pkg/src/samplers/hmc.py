from __future__ import annotations

from typing import Any

import numpy as np

from src.exceptions import ConfigurationError, NonFiniteError
from src.logging_config import get_logger
from src.models.base import EnergyModel
from src.numerics import Rng, as_vector
from src.samplers.diagnostics import ChainDiagnostics
from src.schemas.sampling import ChainConfig

logger = get_logger(__name__)


def leapfrog(
    model: EnergyModel,
    x: np.ndarray,
    v: np.ndarray,
    eps: float,
    n_steps: int,
    mass_inv: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Half momentum step, alternating full steps, closing half momentum step."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float) + 0.5 * eps * model.score(x)
    for i in range(n_steps):
        x = x + eps * (mass_inv @ v)
        if i < n_steps - 1:
            v = v + eps * model.score(x)
    v = v + 0.5 * eps * model.score(x)
    return x, v


def hamiltonian(model: EnergyModel, x: np.ndarray, v: np.ndarray, mass_inv: np.ndarray) -> float:
    return float(model.energy(x)) + 0.5 * float(v @ mass_inv @ v)


def hmc_chain(
    model: EnergyModel, init: Any, cfg: ChainConfig, n_samples: int, rng: Rng
) -> tuple[np.ndarray, ChainDiagnostics]:
    x = as_vector(init, "init")
    if x.shape[0] != model.dim:
        raise ConfigurationError(f"init has dimension {x.shape[0]}, model has {model.dim}")
    M = cfg.mass_matrix(model.dim)
    mass_inv = np.linalg.inv(M)
    chol = np.linalg.cholesky(M)

    samples = np.empty((n_samples, model.dim))
    energies: list[float] = []
    deltas: list[float] = []
    nu_history: list[float] = []
    accepted = 0
    rejected_nonfinite = 0

    for t in range(n_samples):
        v = chol @ rng.normal(size=model.dim)
        h_old = hamiltonian(model, x, v, mass_inv)
        try:
            x_new, v_new = leapfrog(model, x, v, cfg.leapfrog_eps, cfg.leapfrog_steps, mass_inv)
            h_new = hamiltonian(model, x_new, v_new, mass_inv)
        except NonFiniteError:
            h_new = float("nan")
        u = rng.uniform()
        if not np.isfinite(h_new):
            rejected_nonfinite += 1
            deltas.append(float("nan"))
            logger.debug("HMC proposal rejected", iteration=t, reason="non-finite hamiltonian")
        else:
            delta = h_new - h_old
            deltas.append(delta)
            if np.log(u) < -delta:
                x = x_new
                accepted += 1
        samples[t] = x
        energies.append(float(model.energy(x)))
        nu_history.append(float(np.linalg.norm(model.score(x))))

    diagnostics = ChainDiagnostics(
        acceptance_rate=accepted / n_samples if n_samples else 1.0,
        nu=float(np.mean(nu_history)) if nu_history else 0.0,
        energies=energies,
        nu_history=nu_history,
        delta_hamiltonian=deltas,
        rejected_nonfinite=rejected_nonfinite,
    )
    if rejected_nonfinite:
        logger.warning("HMC rejected non-finite trajectories", count=rejected_nonfinite)
    return samples, diagnostics
