from __future__ import annotations

from typing import Any

import numpy as np

from src.models.rbm import Rbm, check_spins, rbm_joint_log_table
from src.numerics import Rng, logsumexp, sigmoid
from src.samplers.diagnostics import ChainDiagnostics


def gibbs_rbm(
    rbm: Rbm, init_v: Any, sweeps: int, rng: Rng, burn_in: int = 0
) -> tuple[np.ndarray, ChainDiagnostics]:
    """
    Block Gibbs sampling. One sweep draws every hidden unit given v, then every
    visible unit given h. Returns the visible state after each post-burn-in sweep.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    v = check_spins(init_v, rbm.n_visible, "init_v")[0].copy()
    W, a, b = rbm.W, rbm.a, rbm.b
    total = burn_in + sweeps
    u_h = rng.uniform(size=(total, rbm.n_hidden))
    u_v = rng.uniform(size=(total, rbm.n_visible))

    out = np.empty((sweeps, rbm.n_visible))
    for t in range(total):
        p_h = sigmoid(2.0 * (v @ W) + 2.0 * b)
        h = np.where(u_h[t] < p_h, 1.0, -1.0)
        p_v = sigmoid(2.0 * (W @ h) + 2.0 * a)
        v = np.where(u_v[t] < p_v, 1.0, -1.0)
        if t >= burn_in:
            out[t - burn_in] = v

    energies = np.atleast_1d(rbm.energy(out))
    diagnostics = ChainDiagnostics(acceptance_rate=1.0, nu=0.0, energies=energies.tolist())
    return out, diagnostics


def visible_frequencies(samples: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Empirical probability of each row of ``states`` among ``samples``."""
    bits = (np.asarray(samples) > 0).astype(np.int64)
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1)
    codes = bits @ weights
    state_codes = ((np.asarray(states) > 0).astype(np.int64)) @ weights
    counts = np.bincount(codes, minlength=1 << bits.shape[1])
    return counts[state_codes] / samples.shape[0]


def gibbs_block_acceptance(rbm: Rbm) -> float:
    """
    Largest deviation from 1 of the MH acceptance probability of a Gibbs block
    proposal, over every state and every proposed block, for both layers.
    """
    _, _, log_joint = rbm_joint_log_table(rbm)
    worst = 0.0
    # hidden block: q(h'|v) = p(v, h') / p(v)
    log_q_h = log_joint - logsumexp(log_joint, axis=1, keepdims=True)
    ratio_h = (
        log_joint[:, None, :] - log_joint[:, :, None] + log_q_h[:, :, None] - log_q_h[:, None, :]
    )
    worst = max(worst, float(np.max(np.abs(np.minimum(1.0, np.exp(ratio_h)) - 1.0))))
    # visible block: q(v'|h) = p(v', h) / p(h)
    joint_t = log_joint.T
    log_q_v = (log_joint - logsumexp(log_joint, axis=0, keepdims=True)).T
    ratio_v = (
        joint_t[:, None, :] - joint_t[:, :, None] + log_q_v[:, :, None] - log_q_v[:, None, :]
    )
    worst = max(worst, float(np.max(np.abs(np.minimum(1.0, np.exp(ratio_v)) - 1.0))))
    return worst
