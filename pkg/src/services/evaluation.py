"""
Sample-quality and fit metrics: Fréchet-Gaussian distance on raw coordinates,
oracle log-likelihood under an analytic target, and KL(target || model) by grid
quadrature for models of dimension at most ``GRID_MAX_DIM``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from src.config import settings
from src.exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    GridCoverageError,
    MetricConstraintError,
)
from src.logging_config import get_logger
from src.models.base import EnergyModel
from src.numerics import GaussianSummary, gaussian_fit, logsumexp, psd_sqrt
from src.schemas.evaluation import ClaimsLedger, GridAxis, GridSpec

logger = get_logger(__name__)

GRID_COVERAGE_REQUIRED = 0.999
GRID_CHUNK = 65536


def frechet_gaussian(a: GaussianSummary, b: GaussianSummary) -> float:
    """‖μa - μb‖² + Tr(Σa + Σb - 2 (Σa^½ Σb Σa^½)^½), clamped at zero."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"summaries have dimensions {a.dim} and {b.dim}")
    diff = a.mean - b.mean
    root_a = psd_sqrt(a.cov)
    inner = root_a @ b.cov @ root_a
    cross = psd_sqrt(0.5 * (inner + inner.T))
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def frechet_from_samples(x: Any, y: Any) -> float:
    return frechet_gaussian(gaussian_fit(x), gaussian_fit(y))


def oracle_log_likelihood(target: Any, samples: Any) -> float:
    if not hasattr(target, "log_pdf"):
        raise MetricConstraintError("oracle log-likelihood needs a target with an exact log-pdf")
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, target.dim)
    return float(np.mean(np.atleast_1d(target.log_pdf(X))))


def _grid(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Grid points (M, d) and log trapezoid weights (M,)."""
    axes = [axis.points() for axis in grid.axes]
    log_w_axes = []
    for pts in axes:
        h = pts[1] - pts[0]
        w = np.full(pts.shape[0], h)
        w[0] = w[-1] = 0.5 * h
        log_w_axes.append(np.log(w))
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    log_w = np.zeros(X.shape[0])
    for lw in np.meshgrid(*log_w_axes, indexing="ij"):
        log_w += lw.ravel()
    return X, log_w


def _chunked(fn: Any, X: np.ndarray) -> np.ndarray:
    return np.concatenate(
        [np.atleast_1d(fn(X[i : i + GRID_CHUNK])) for i in range(0, X.shape[0], GRID_CHUNK)]
    )


def grid_coverage(target: Any, grid: GridSpec) -> float:
    X, log_w = _grid(grid)
    return float(np.exp(logsumexp(_chunked(target.log_pdf, X) + log_w)))


def check_grid_dim(d: int) -> None:
    if d > settings.GRID_MAX_DIM:
        raise MetricConstraintError(
            f"grid_kl needs dimension <= {settings.GRID_MAX_DIM}, got {d}"
        )


def target_grid(target: Any, n_points: int = 128, width: float = 8.0) -> GridSpec:
    """Axis-aligned box spanning ``width`` standard deviations around every mode."""
    check_grid_dim(target.dim)
    if hasattr(target, "means"):
        centres = np.atleast_2d(target.means)
        spreads = np.sqrt(np.atleast_2d(target.variances))
    else:
        centres = np.atleast_2d(target.mu)
        spreads = np.sqrt(np.atleast_2d(np.diag(target.covariance)))
    lo = (centres - width * spreads).min(axis=0)
    hi = (centres + width * spreads).max(axis=0)
    return GridSpec(
        axes=[GridAxis(lo=float(a), hi=float(b), n_points=n_points) for a, b in zip(lo, hi)]
    )


def grid_kl(model: EnergyModel, target: Any, grid: GridSpec) -> float:
    """
    KL(target || model) in nats. Both densities are normalised on the grid, the
    model through log-sum-exp of -E against the trapezoid weights.
    """
    d = grid.dim
    check_grid_dim(d)
    if model.dim != d or getattr(target, "dim", d) != d:
        raise MetricConstraintError(
            f"grid has dimension {d}, model {model.dim}, target {getattr(target, 'dim', '?')}"
        )
    X, log_w = _grid(grid)
    log_p = _chunked(target.log_pdf, X)
    coverage = float(np.exp(logsumexp(log_p + log_w)))
    if coverage < GRID_COVERAGE_REQUIRED:
        raise GridCoverageError(coverage, GRID_COVERAGE_REQUIRED)

    log_p = log_p - logsumexp(log_p + log_w)
    neg_e = -_chunked(model.energy, X)
    log_q = neg_e - logsumexp(neg_e + log_w)
    weights = np.exp(log_p + log_w)
    kl = float(np.sum(weights * (log_p - log_q)))
    logger.debug("Grid KL evaluated", dim=d, points=X.shape[0], coverage=coverage, kl=kl)
    return kl


def load_claims_ledger(path: str | Path | None = None) -> ClaimsLedger:
    """Read the acceptance thresholds file (``CLAIMS_LEDGER_PATH`` by default)."""
    path = Path(path or settings.CLAIMS_LEDGER_PATH)
    try:
        ledger = ClaimsLedger.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    except ValidationError as e:
        raise ConfigurationError(f"{path}: invalid claims ledger: {e}") from e
    provisional = sorted(n for n, c in ledger.claims.items() if c.status == "provisional")
    if provisional:
        logger.warning("Claims ledger has provisional thresholds", claims=provisional)
    return ledger
