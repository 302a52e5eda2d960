"""
Convex generators for Bregman ratio matching and their (S0, S1) parameterisation.

For a strictly convex Ψ on u > 0 the pair is S0(u) = uΨ'(u) - Ψ(u),
S1(u) = Ψ'(u), which satisfies S0'(u) / S1'(u) = u with S1'(u) = Ψ''(u) > 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from src.exceptions import DimensionMismatchError, DomainError, SPairValidationError
from src.logging_config import get_logger
from src.numerics import log_sigmoid, sigmoid, softplus

logger = get_logger(__name__)

Fn = Callable[[np.ndarray], np.ndarray]

VALIDATION_GRID = np.round(np.arange(1, 101) * 0.1, 10)
RATIO_TOLERANCE = 1e-8
DERIVATIVE_TOLERANCE = 1e-6
FD_STEP = 1e-5


@dataclass(frozen=True)
class ConvexFunction:
    """Ψ with its gradient. Separable forms act elementwise and are summed."""

    name: str
    psi: Fn
    grad: Fn
    hess: Optional[Fn] = None
    positive_domain: bool = False
    separable: bool = True
    description: str = ""

    def check_domain(self, x: np.ndarray) -> None:
        if self.positive_domain and np.any(x <= 0):
            raise DomainError(f"{self.name}: inputs must be strictly positive")


def _xlogx(u: np.ndarray) -> np.ndarray:
    return u * np.log(u)


LOG_TYPE_PSI = ConvexFunction(
    name="log",
    psi=lambda u: _xlogx(u) - (1.0 + u) * np.log1p(u),
    grad=lambda u: np.log(u) - np.log1p(u),
    hess=lambda u: 1.0 / u - 1.0 / (1.0 + u),
    positive_domain=True,
    description="u log u - (1+u) log(1+u)",
)

KL_PSI = ConvexFunction(
    name="kl",
    psi=_xlogx,
    grad=lambda u: np.log(u) + 1.0,
    hess=lambda u: 1.0 / u,
    positive_domain=True,
    description="u log u",
)

SQUARED_PSI = ConvexFunction(
    name="quadratic",
    psi=lambda u: 0.5 * u**2,
    grad=lambda u: u,
    hess=lambda u: np.ones_like(u),
    description="u^2 / 2",
)


def mahalanobis_psi(sigma: Any) -> ConvexFunction:
    """Ψ(u) = ½ uᵀ Σ u on vectors; not separable, so it has no (S0, S1) pair."""
    S = np.asarray(sigma, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionMismatchError("Mahalanobis Σ must be a square matrix")
    if not np.allclose(S, S.T) or np.min(np.linalg.eigvalsh(0.5 * (S + S.T))) <= 0:
        raise DomainError("Mahalanobis Σ must be symmetric positive definite")
    return ConvexFunction(
        name="mahalanobis",
        psi=lambda u: 0.5 * float(u @ S @ u),
        grad=lambda u: S @ u,
        separable=False,
        description="u^T Sigma u / 2",
    )


@dataclass(frozen=True)
class SPair:
    """
    (S0, S1) pair driving a ratio-matching loss. The optional ``*_log`` callables
    take ℓ = log g and must agree with the plain forms; pairs that provide them
    are evaluated without exponentiating the ratio.
    """

    name: str
    s0: Fn
    s1: Fn
    ds0: Fn
    ds1: Fn
    convex: ConvexFunction
    s0_log: Optional[Fn] = None
    s1_log: Optional[Fn] = None
    w0_log: Optional[Fn] = None
    w1_log: Optional[Fn] = None

    @property
    def psi_description(self) -> str:
        return self.convex.description

    @property
    def log_domain(self) -> bool:
        return self.s0_log is not None

    def ds0_at_one(self) -> float:
        return float(self.ds0(np.array([1.0]))[0])


def spair_from_convex(
    convex: ConvexFunction, name: str | None = None, **log_forms: Fn
) -> SPair:
    if convex.hess is None or not convex.separable:
        raise DomainError(f"{convex.name}: an S-pair needs a separable Ψ with a second derivative")
    hess = convex.hess
    return SPair(
        name=name or convex.name,
        s0=lambda u: u * convex.grad(u) - convex.psi(u),
        s1=convex.grad,
        ds0=lambda u: u * hess(u),
        ds1=hess,
        convex=convex,
        **log_forms,
    )


LOG_SPAIR = SPair(
    name="log",
    s0=np.log1p,
    s1=lambda u: np.log(u) - np.log1p(u),
    ds0=lambda u: 1.0 / (1.0 + u),
    ds1=lambda u: 1.0 / u - 1.0 / (1.0 + u),
    convex=LOG_TYPE_PSI,
    s0_log=softplus,
    s1_log=log_sigmoid,
    w0_log=sigmoid,
    w1_log=lambda ell: sigmoid(-np.asarray(ell, dtype=float)),
)

KL_SPAIR = SPair(
    name="kl",
    s0=lambda u: np.asarray(u, dtype=float),
    s1=lambda u: np.log(u) + 1.0,
    ds0=lambda u: np.ones_like(np.asarray(u, dtype=float)),
    ds1=lambda u: 1.0 / u,
    convex=KL_PSI,
)

QUADRATIC_SPAIR = spair_from_convex(SQUARED_PSI)


def spair_residual(spair: SPair, grid: np.ndarray = VALIDATION_GRID) -> float:
    """max |S0'(g)/S1'(g) - g| over the grid; infinite if S1' is not positive."""
    g = np.asarray(grid, dtype=float)
    d1 = spair.ds1(g)
    if np.any(d1 <= 0) or not np.all(np.isfinite(d1)):
        return float("inf")
    return float(np.max(np.abs(spair.ds0(g) / d1 - g)))


def derivative_residual(spair: SPair, grid: np.ndarray = VALIDATION_GRID) -> float:
    """Largest relative gap between the declared derivatives and central differences."""
    g = np.asarray(grid, dtype=float)
    worst = 0.0
    for f, df in ((spair.s0, spair.ds0), (spair.s1, spair.ds1)):
        fd = (f(g + FD_STEP) - f(g - FD_STEP)) / (2.0 * FD_STEP)
        exact = df(g)
        worst = max(worst, float(np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact)))))
    return worst


def validate_spair(spair: SPair, grid: np.ndarray = VALIDATION_GRID) -> SPair:
    residual = spair_residual(spair, grid)
    if residual > RATIO_TOLERANCE:
        raise SPairValidationError(spair.name, residual)
    fd_residual = derivative_residual(spair, grid)
    if fd_residual > DERIVATIVE_TOLERANCE:
        raise SPairValidationError(spair.name, fd_residual)
    if spair.log_domain:
        ell = np.log(np.asarray(grid, dtype=float))
        g = np.exp(ell)
        checks = [
            (spair.s0_log, spair.s0(g)),
            (spair.s1_log, spair.s1(g)),
            (spair.w0_log, spair.ds0(g) * g),
            (spair.w1_log, spair.ds1(g) * g),
        ]
        for fn, expected in checks:
            if fn is None:
                raise SPairValidationError(spair.name, float("inf"))
            gap = float(np.max(np.abs(fn(ell) - expected)))
            if gap > RATIO_TOLERANCE:
                raise SPairValidationError(spair.name, gap)
    return spair


def spair_catalog() -> list[SPair]:
    """The validated catalogue: log-type, KL-type and quadratic pairs."""
    return [validate_spair(s) for s in (LOG_SPAIR, KL_SPAIR, QUADRATIC_SPAIR)]


def get_spair(name: str) -> SPair:
    for s in spair_catalog():
        if s.name == name:
            return s
    raise DomainError(f"unknown S-pair '{name}'")


def bregman_point(psi: SPair | ConvexFunction, x: Any, y: Any) -> float:
    """d_Ψ(x, y) = Ψ(x) - Ψ(y) - ⟨∇Ψ(y), x - y⟩."""
    convex = psi.convex if isinstance(psi, SPair) else psi
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    if xa.shape != ya.shape:
        raise DimensionMismatchError(f"x {xa.shape} and y {ya.shape} differ in shape")
    convex.check_domain(xa)
    convex.check_domain(ya)
    if convex.separable:
        terms = convex.psi(xa) - convex.psi(ya) - convex.grad(ya) * (xa - ya)
        return float(np.sum(terms))
    return float(convex.psi(xa) - convex.psi(ya) - convex.grad(ya) @ (xa - ya))
