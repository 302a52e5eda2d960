"""
Dense numerical primitives shared by every other module.

Vectors and matrices are plain float64 numpy arrays; the helpers here only
validate shapes/finiteness at API boundaries. Randomness always flows through an
explicit :class:`Rng` handle, never through numpy's global state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.exceptions import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    DomainError,
    InsufficientSamplesError,
    NonFiniteError,
    NotPsdError,
)
from src.logging_config import get_logger

logger = get_logger(__name__)

PSD_TOLERANCE = 1e-9
SYMMETRY_TOLERANCE = 1e-12


class Rng:
    """Seeded PCG64 stream. Same seed gives a bit-identical draw sequence."""

    ALGORITHM = "PCG64"

    def __init__(self, seed: int, _seed_seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = _seed_seq if _seed_seq is not None else np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    @property
    def algorithm(self) -> str:
        return self.ALGORITHM

    def spawn(self, n: int) -> list["Rng"]:
        """Deterministic child streams, independent of draws made on this stream."""
        return [Rng(self.seed, _seed_seq=child) for child in self._seq.spawn(n)]

    def normal(self, size=None, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def random(self, size=None) -> np.ndarray:
        return self.generator.random(size)

    def integers(self, low: int, high: int | None = None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size)

    def rademacher(self, size) -> np.ndarray:
        return self.generator.choice(np.array([-1.0, 1.0]), size=size)

    def state(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "algorithm": self.ALGORITHM,
            "bit_generator": self.generator.bit_generator.state,
        }

    @classmethod
    def from_state(cls, state: dict[str, Any]) -> "Rng":
        if state.get("algorithm") != cls.ALGORITHM:
            raise ValueError(f"unsupported generator algorithm: {state.get('algorithm')}")
        rng = cls(int(state["seed"]))
        rng.generator.bit_generator.state = state["bit_generator"]
        return rng

    def __repr__(self) -> str:
        return f"<Rng seed={self.seed} {self.ALGORITHM}>"


def as_vector(x: Any, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return arr


def as_matrix(x: Any, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatchError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return arr


def sigmoid(x: Any) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x: Any) -> np.ndarray:
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


def softplus(x: Any) -> np.ndarray:
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def logsumexp(a: Any, axis: int | None = None, keepdims: bool = False) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return out


def rademacher_sign_vectors(d: int) -> np.ndarray:
    """All 2**d sign vectors of length d, one per row."""
    return np.array(list(itertools.product((-1.0, 1.0), repeat=d)))


def _unit(x: np.ndarray) -> tuple[np.ndarray, float]:
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return x, 0.0
    return x / nrm, nrm


def power_iteration_sigma_max(
    W: Any,
    n_iters: int,
    rng: Rng | None = None,
    u0: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Estimate the largest singular value of ``W`` by power iteration.

    ``u0`` warm-starts the left singular vector (the value returned by the
    previous call on the same layer); otherwise ``u`` is drawn from ``rng``.
    Returns ``(sigma, u, v)`` with unit-norm ``u`` and ``v``.
    """
    W = as_matrix(W, "W")
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    if not np.any(W):
        raise DegenerateSpectrumError()

    m = W.shape[0]
    u = None
    if u0 is not None:
        u, nrm = _unit(as_vector(u0, "u0"))
        if u.shape[0] != m:
            raise DimensionMismatchError(f"u0 has length {u.shape[0]}, expected {m}")
        if nrm == 0.0:
            u = None
    if u is None:
        if rng is None:
            raise ValueError("an Rng is required when no warm-start vector is given")
        u, _ = _unit(rng.normal(size=m))

    v = np.zeros(W.shape[1])
    for _ in range(n_iters):
        v, nrm = _unit(W.T @ u)
        retries = 0
        while nrm == 0.0:
            # u fell into the left null space of W
            if rng is None or retries >= 8:
                raise DegenerateSpectrumError()
            u, _ = _unit(rng.normal(size=m))
            v, nrm = _unit(W.T @ u)
            retries += 1
        u, _ = _unit(W @ v)

    sigma = float(u @ W @ v)
    return sigma, u, v


def jacobi_eigh(
    M: Any, tol: float = 1e-15, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors as
    columns, so that ``M = V @ diag(w) @ V.T``.
    """
    A = as_matrix(M, "M").copy()
    n = A.shape[0]
    if A.shape[1] != n:
        raise DimensionMismatchError(f"matrix must be square, got {A.shape}")
    V = np.eye(n)
    scale = max(float(np.linalg.norm(A)), np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(A**2) - np.sum(np.diag(A) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q

                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq

    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def _check_symmetric(M: np.ndarray, tol: float) -> None:
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    asym = float(np.max(np.abs(M - M.T)))
    if asym > tol * scale:
        raise DomainError(f"matrix is not symmetric (max asymmetry {asym:.3e})")


def psd_sqrt(M: Any) -> np.ndarray:
    """Symmetric square root of a symmetric positive semi-definite matrix."""
    M = as_matrix(M, "M")
    _check_symmetric(M, PSD_TOLERANCE)
    M = 0.5 * (M + M.T)
    w, V = jacobi_eigh(M)
    floor = -PSD_TOLERANCE * max(1.0, float(np.max(np.abs(w))))
    if w[0] < floor:
        raise NotPsdError(float(w[0]))
    w = np.clip(w, 0.0, None)
    R = (V * np.sqrt(w)) @ V.T
    return 0.5 * (R + R.T)


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = np.atleast_2d(as_matrix(np.atleast_2d(self.cov), "cov"))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionMismatchError(
                f"cov shape {cov.shape} does not match mean length {mean.shape[0]}"
            )
        _check_symmetric(cov, SYMMETRY_TOLERANCE)
        w, _ = jacobi_eigh(cov)
        if w[0] < -PSD_TOLERANCE * max(1.0, float(np.max(np.abs(w)))):
            raise NotPsdError(float(w[0]))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def shifted(self, c: Any) -> "GaussianSummary":
        return GaussianSummary(self.mean + as_vector(c, "shift"), self.cov)


def gaussian_fit(samples: Any) -> GaussianSummary:
    """Sample mean and unbiased (N-1 normalised) covariance."""
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] < 2:
        raise InsufficientSamplesError(X.shape[0])
    X = as_matrix(X, "samples")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianSummary(mean, cov)
