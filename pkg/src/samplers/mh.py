from __future__ import annotations

import bisect
from typing import Any, Callable

import numpy as np

from src.exceptions import DimensionMismatchError, DomainError, NonFiniteError
from src.logging_config import get_logger
from src.numerics import Rng
from src.samplers.diagnostics import ChainDiagnostics

logger = get_logger(__name__)

Proposal = Callable[[Any, Rng], tuple[Any, float, float]]


def mh_chain(
    log_unnorm_target: Callable[[Any], float],
    proposal: Proposal,
    init: Any,
    steps: int,
    rng: Rng,
) -> tuple[list[Any], ChainDiagnostics]:
    """
    Metropolis-Hastings with a user proposal returning
    ``(candidate, log q(candidate | x), log q(x | candidate))``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = init
    log_p = float(log_unnorm_target(x))
    if not np.isfinite(log_p):
        raise NonFiniteError("log target is not finite at the initial state")

    samples: list[Any] = []
    log_ps: list[float] = []
    accepted = 0
    for _ in range(steps):
        cand, log_q_fwd, log_q_rev = proposal(x, rng)
        log_p_cand = float(log_unnorm_target(cand))
        log_alpha = log_p_cand + log_q_rev - log_p - log_q_fwd
        if np.isfinite(log_p_cand) and (log_alpha >= 0 or np.log(rng.uniform()) < log_alpha):
            x, log_p = cand, log_p_cand
            accepted += 1
        samples.append(x)
        log_ps.append(log_p)

    diagnostics = ChainDiagnostics(
        acceptance_rate=accepted / steps, nu=0.0, energies=[-lp for lp in log_ps]
    )
    return samples, diagnostics


def acceptance_probability(
    log_target_x: float, log_target_cand: float, log_q_fwd: float, log_q_rev: float
) -> float:
    """min(1, π(x*) q(x|x*) / (π(x) q(x*|x))) from log quantities."""
    log_alpha = log_target_cand + log_q_rev - log_target_x - log_q_fwd
    return float(np.exp(min(0.0, log_alpha)))


def _check_discrete(probs: Any, proposal_matrix: Any) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=float)
    Q = np.asarray(proposal_matrix, dtype=float)
    if Q.shape != (p.shape[0], p.shape[0]):
        raise DimensionMismatchError(
            f"proposal matrix {Q.shape} does not match {p.shape[0]} states"
        )
    if np.any(p <= 0):
        raise DomainError("target probabilities must be positive")
    if np.any(Q < 0) or not np.allclose(Q.sum(axis=1), 1.0):
        raise DomainError("proposal rows must be probability vectors")
    return p, Q


def mh_transition_matrix(probs: Any, proposal_matrix: Any) -> np.ndarray:
    """Exact MH kernel K[x, x'] on a finite state space; targets may be unnormalised."""
    p, Q = _check_discrete(probs, proposal_matrix)
    n = p.shape[0]
    K = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] > 0:
                K[i, j] = Q[i, j] * min(1.0, (p[j] * Q[j, i]) / (p[i] * Q[i, j]))
        K[i, i] = 1.0 - K[i].sum()
    return K


def detailed_balance_residual(probs: Any, kernel: np.ndarray) -> float:
    """max |p(x) K(x'|x) - p(x') K(x|x')| over all pairs."""
    p = np.asarray(probs, dtype=float)
    p = p / p.sum()
    flow = p[:, None] * kernel
    return float(np.max(np.abs(flow - flow.T)))


def mh_discrete_chain(
    probs: Any, proposal_matrix: Any, init: int, steps: int, rng: Rng
) -> tuple[np.ndarray, ChainDiagnostics]:
    """Fast MH on a finite state space: uniforms and candidates are drawn in one block."""
    p, Q = _check_discrete(probs, proposal_matrix)
    n = p.shape[0]
    cdf = np.cumsum(Q, axis=1).tolist()
    ratio = ((p[None, :] * Q.T) / np.where(Q > 0, p[:, None] * Q, 1.0)).tolist()
    u_prop = rng.uniform(size=steps).tolist()
    u_acc = rng.uniform(size=steps).tolist()
    out = [0] * steps
    x = int(init)
    accepted = 0
    for t in range(steps):
        cand = min(bisect.bisect_right(cdf[x], u_prop[t]), n - 1)
        if u_acc[t] < ratio[x][cand]:
            accepted += 1
            x = cand
        out[t] = x
    states = np.asarray(out, dtype=np.int64)
    log_p = np.log(p)
    diagnostics = ChainDiagnostics(
        acceptance_rate=accepted / steps, nu=0.0, energies=(-log_p[states]).tolist()
    )
    return states, diagnostics


def empirical_tv(states: np.ndarray, probs: Any) -> float:
    p = np.asarray(probs, dtype=float)
    p = p / p.sum()
    freq = np.bincount(states, minlength=p.shape[0]) / len(states)
    return float(0.5 * np.sum(np.abs(freq - p)))


def gaussian_random_walk(scale: float) -> Proposal:
    def propose(x: Any, rng: Rng) -> tuple[Any, float, float]:
        cand = np.asarray(x, dtype=float) + scale * rng.normal(size=np.shape(x))
        return cand, 0.0, 0.0

    return propose
