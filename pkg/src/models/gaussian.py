from __future__ import annotations

from typing import Any

import numpy as np

from src.exceptions import DimensionMismatchError, DomainError
from src.models.base import AnalyticDensity, EnergyModel, ParamLayout
from src.numerics import Rng, as_matrix, as_vector

LOG_2PI = float(np.log(2.0 * np.pi))


class AnalyticGaussianEnergy(EnergyModel, AnalyticDensity):
    """
    E(x) = ½ (x - mu)ᵀ P (x - mu) with P the precision matrix.

    Parameters are ``mu`` and the full (unsymmetrised) matrix ``P``; the energy
    only sees its symmetric part, so gradients with respect to ``P`` are the
    symmetric-part gradients spread over both triangles.
    """

    kind = "gaussian"

    def __init__(self, mu: Any, sigma_inv: Any, name: str = "gaussian"):
        mu = as_vector(mu, "mu")
        P = as_matrix(np.atleast_2d(sigma_inv), "sigma_inv")
        if P.shape != (mu.shape[0], mu.shape[0]):
            raise DimensionMismatchError(
                f"sigma_inv shape {P.shape} does not match mu length {mu.shape[0]}"
            )
        d = mu.shape[0]
        layout = ParamLayout([("mu", (d,)), ("P", (d, d))])
        super().__init__(d, layout, np.concatenate([mu, P.ravel()]))
        self.name = name

    @classmethod
    def from_covariance(cls, mu: Any, cov: Any, name: str = "gaussian") -> "AnalyticGaussianEnergy":
        cov = as_matrix(np.atleast_2d(cov), "cov")
        return cls(mu, np.linalg.inv(cov), name=name)

    @classmethod
    def standard(cls, dim: int) -> "AnalyticGaussianEnergy":
        return cls(np.zeros(dim), np.eye(dim))

    @property
    def mu(self) -> np.ndarray:
        return self.tensor("mu")

    @property
    def precision(self) -> np.ndarray:
        P = self.tensor("P")
        return 0.5 * (P + P.T)

    @property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self._checked_precision())

    def _checked_precision(self) -> np.ndarray:
        P = self.precision
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as e:
            raise DomainError("precision matrix is not positive definite") from e
        return P

    # -- energy hooks ---------------------------------------------------------------

    def _energy(self, X: np.ndarray) -> np.ndarray:
        D = X - self.mu
        return 0.5 * np.einsum("ni,ij,nj->n", D, self.precision, D)

    def _score(self, X: np.ndarray) -> np.ndarray:
        return -(X - self.mu) @ self.precision

    def _param_grad(self, X: np.ndarray) -> np.ndarray:
        D = X - self.mu
        g_mu = -D @ self.precision
        g_P = 0.5 * np.einsum("ni,nj->nij", D, D).reshape(X.shape[0], -1)
        return np.hstack([g_mu, g_P])

    def _score_vjp(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        D = X - self.mu
        g_mu = G @ self.precision
        outer = np.einsum("ni,nj->nij", G, D)
        g_P = -0.5 * (outer + outer.transpose(0, 2, 1))
        return np.hstack([g_mu, g_P.reshape(X.shape[0], -1)])

    @property
    def has_exact_laplacian(self) -> bool:
        return True

    def _laplacian(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], -float(np.trace(self.precision)))

    def _laplacian_param_grad(self, X: np.ndarray) -> np.ndarray:
        row = np.concatenate([np.zeros(self.dim), -np.eye(self.dim).ravel()])
        return np.tile(row, (X.shape[0], 1))

    # -- analytic density -----------------------------------------------------------

    def log_pdf(self, x: Any) -> Any:
        X, single = self._batch(x)
        P = self._checked_precision()
        _, logdet = np.linalg.slogdet(P)
        out = -self._energy(X) + 0.5 * logdet - 0.5 * self.dim * LOG_2PI
        return float(out[0]) if single else out

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        L = np.linalg.cholesky(self.covariance)
        return self.mu + rng.normal(size=(n, self.dim)) @ L.T

    def config_dict(self) -> dict[str, Any]:
        return {"dim": self.dim, "name": self.name}

    @classmethod
    def from_config(cls, config: dict[str, Any], theta: np.ndarray) -> "AnalyticGaussianEnergy":
        d = int(config["dim"])
        model = cls(np.zeros(d), np.eye(d), name=config.get("name", "gaussian"))
        model.set_params(theta)
        return model
