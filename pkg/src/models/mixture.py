from __future__ import annotations

from typing import Any

import numpy as np

from src.exceptions import DimensionMismatchError, DomainError
from src.models.base import AnalyticDensity, EnergyModel, ParamLayout
from src.numerics import Rng, as_vector, logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianMixtureEnergy(EnergyModel, AnalyticDensity):
    """
    Diagonal-covariance Gaussian mixture with E(x) = -log Σ_k w_k N(x; mu_k, var_k).

    The energy is the exact negative log density, so the model doubles as an
    analytic target. Parameters are mixing logits, means and log-variances.
    """

    kind = "mixture"

    def __init__(self, weights: Any, means: Any, variances: Any, name: str = "mixture"):
        w = as_vector(weights, "weights")
        M = np.atleast_2d(np.asarray(means, dtype=float))
        V = np.atleast_2d(np.asarray(variances, dtype=float))
        if M.shape[0] != w.shape[0] or V.shape != M.shape:
            raise DimensionMismatchError(
                f"weights {w.shape}, means {M.shape} and variances {V.shape} disagree"
            )
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise DomainError("mixture weights must be positive and sum to 1")
        if np.any(V <= 0) or not np.all(np.isfinite(V)) or not np.all(np.isfinite(M)):
            raise DomainError("mixture variances must be positive and finite")
        k, d = M.shape
        layout = ParamLayout([("logits", (k,)), ("means", (k, d)), ("log_var", (k, d))])
        theta = np.concatenate([np.log(w), M.ravel(), np.log(V).ravel()])
        super().__init__(d, layout, theta)
        self.n_components = k
        self.name = name

    @classmethod
    def four_modes(cls, radius: float = 2.0, std: float = 0.5) -> "GaussianMixtureEnergy":
        means = radius * np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
        return cls(np.full(4, 0.25), means, np.full((4, 2), std**2), name="four_modes")

    @classmethod
    def two_modes_1d(
        cls, separation: float = 2.0, std: float = 0.5, weight: float = 0.5
    ) -> "GaussianMixtureEnergy":
        means = np.array([[-separation / 2.0], [separation / 2.0]])
        return cls(
            np.array([weight, 1.0 - weight]), means, np.full((2, 1), std**2), name="two_modes_1d"
        )

    # -- derived tensors --------------------------------------------------------------

    @property
    def weights(self) -> np.ndarray:
        logits = self.tensor("logits")
        return np.exp(logits - logsumexp(logits))

    @property
    def means(self) -> np.ndarray:
        return self.tensor("means")

    @property
    def variances(self) -> np.ndarray:
        return np.exp(self.tensor("log_var"))

    def smoothed(self, sigma: float) -> "GaussianMixtureEnergy":
        """Convolution with N(0, sigma² I), still a mixture in closed form."""
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        return GaussianMixtureEnergy(
            self.weights, self.means.copy(), self.variances + sigma**2, name=f"{self.name}_smoothed"
        )

    def _terms(self, X: np.ndarray):
        var = self.variances
        diff = X[:, None, :] - self.means[None, :, :]
        log_norm = -0.5 * np.sum(diff**2 / var + np.log(var) + LOG_2PI, axis=2)
        logits = self.tensor("logits")
        log_w = logits - logsumexp(logits)
        joint = log_w[None, :] + log_norm
        log_p = logsumexp(joint, axis=1)
        resp = np.exp(joint - log_p[:, None])
        a = -diff / var
        return diff, var, log_p, resp, a

    # -- energy hooks -----------------------------------------------------------------

    def _energy(self, X: np.ndarray) -> np.ndarray:
        return -self._terms(X)[2]

    def _score(self, X: np.ndarray) -> np.ndarray:
        _, _, _, resp, a = self._terms(X)
        return np.einsum("nk,nkd->nd", resp, a)

    def _param_grad(self, X: np.ndarray) -> np.ndarray:
        diff, var, _, resp, a = self._terms(X)
        n = X.shape[0]
        g_logits = self.weights[None, :] - resp
        g_means = resp[:, :, None] * a
        g_logvar = -0.5 * resp[:, :, None] * (diff**2 / var - 1.0)
        return np.hstack([g_logits, g_means.reshape(n, -1), g_logvar.reshape(n, -1)])

    def _score_vjp(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        diff, var, _, resp, a = self._terms(X)
        n = X.shape[0]
        b = np.einsum("nd,nkd->nk", G, a)
        f = np.sum(resp * b, axis=1)
        centred = resp * (b - f[:, None])
        g_logits = centred
        g_means = -centred[:, :, None] * a + resp[:, :, None] * G[:, None, :] / var[None]
        g_logvar = 0.5 * centred[:, :, None] * (diff**2 / var - 1.0) - resp[:, :, None] * (
            G[:, None, :] * a
        )
        return np.hstack([g_logits, g_means.reshape(n, -1), g_logvar.reshape(n, -1)])

    @property
    def has_exact_laplacian(self) -> bool:
        return True

    def _laplacian(self, X: np.ndarray) -> np.ndarray:
        _, var, _, resp, a = self._terms(X)
        s = np.einsum("nk,nkd->nd", resp, a)
        per_comp = -np.sum(1.0 / var, axis=1)[None, :] + np.sum(a**2, axis=2)
        return np.sum(resp * per_comp, axis=1) - np.sum(s**2, axis=1)

    # -- analytic density -------------------------------------------------------------

    def log_pdf(self, x: Any) -> Any:
        X, single = self._batch(x)
        out = self._terms(X)[2]
        return float(out[0]) if single else out

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        comp = rng.generator.choice(self.n_components, size=n, p=self.weights)
        eps = rng.normal(size=(n, self.dim))
        return self.means[comp] + np.sqrt(self.variances[comp]) * eps

    def config_dict(self) -> dict[str, Any]:
        return {"dim": self.dim, "n_components": self.n_components, "name": self.name}

    @classmethod
    def from_config(cls, config: dict[str, Any], theta: np.ndarray) -> "GaussianMixtureEnergy":
        k, d = int(config["n_components"]), int(config["dim"])
        model = cls(
            np.full(k, 1.0 / k), np.zeros((k, d)), np.ones((k, d)), config.get("name", "mixture")
        )
        model.set_params(theta)
        return model
