"""
Small fully-connected energy network with optional spectral normalisation.

Layer ``l`` computes ``z = W̄ a + b`` with ``W̄ = W / σ̂`` when spectral
normalisation is on. ``σ̂`` is a cached, detached estimate that only changes in
:meth:`MlpEnergy.spectral_normalize_forward`, so plain evaluation is pure.
"""

from __future__ import annotations

from typing import Any, Literal

import numpy as np

from src.exceptions import ConfigurationError, DimensionMismatchError, FrozenModelError
from src.logging_config import get_logger
from src.models.base import EnergyModel, ParamLayout
from src.numerics import Rng, power_iteration_sigma_max

logger = get_logger(__name__)

Activation = Literal["leaky_relu", "tanh"]

DEFAULT_WIDTHS_2D = [2, 64, 64, 1]


class MlpEnergy(EnergyModel):
    kind = "mlp"

    def __init__(
        self,
        layer_widths: list[int],
        rng: Rng | None = None,
        leaky_slope: float = 0.2,
        spectral_norm: bool = False,
        power_iters: int = 1,
        activation: Activation = "leaky_relu",
        warmup_power_iters: int = 500,
        theta: np.ndarray | None = None,
    ):
        widths = [int(w) for w in layer_widths]
        if len(widths) < 2 or widths[-1] != 1 or min(widths) < 1:
            raise ConfigurationError(f"layer widths must be positive and end in 1, got {widths}")
        if not 0.0 < leaky_slope < 1.0:
            raise ConfigurationError("leaky_slope must lie in (0, 1)")
        if activation not in ("leaky_relu", "tanh"):
            raise ConfigurationError(f"unknown activation '{activation}'")
        if power_iters < 1:
            raise ConfigurationError("power_iters must be >= 1")

        entries: list[tuple[str, tuple[int, ...]]] = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            entries.append((f"W{i}", (fan_out, fan_in)))
            entries.append((f"b{i}", (fan_out,)))
        layout = ParamLayout(entries)

        if theta is None:
            if rng is None:
                raise ConfigurationError("an Rng is required to initialise MLP weights")
            theta = self._init_theta(layout, widths, rng)
        super().__init__(widths[0], layout, theta)

        self.layer_widths = widths
        self.n_layers = len(widths) - 1
        self.leaky_slope = float(leaky_slope)
        self.activation: Activation = activation
        self.spectral_norm = bool(spectral_norm)
        self.power_iters = int(power_iters)
        self.warmup_power_iters = int(warmup_power_iters)
        self._sn_rng = rng.spawn(1)[0] if rng is not None else Rng(0)
        self._u: list[np.ndarray | None] = [None] * self.n_layers
        self._sigma = np.ones(self.n_layers)

        if self.spectral_norm and rng is not None:
            self.spectral_normalize_forward(n_iters=self.warmup_power_iters)

    @staticmethod
    def _init_theta(layout: ParamLayout, widths: list[int], rng: Rng) -> np.ndarray:
        theta = np.empty(layout.size)
        for i, fan_in in enumerate(widths[:-1]):
            bound = 1.0 / np.sqrt(fan_in)
            for name in (f"W{i}", f"b{i}"):
                e = layout[name]
                theta[e.offset : e.offset + e.size] = rng.uniform(-bound, bound, size=e.size)
        return theta

    # -- spectral normalisation -------------------------------------------------------

    def weight(self, i: int) -> np.ndarray:
        return self.tensor(f"W{i}")

    def bias(self, i: int) -> np.ndarray:
        return self.tensor(f"b{i}")

    def effective_weight(self, i: int) -> np.ndarray:
        W = self.weight(i)
        return W / self._sigma[i] if self.spectral_norm else W

    @property
    def sigma_estimates(self) -> np.ndarray:
        return self._sigma.copy()

    def spectral_normalize_forward(self, n_iters: int | None = None) -> list[np.ndarray]:
        """
        Refresh each layer's σ̂ by warm-started power iteration and return the
        effective weights W / σ̂ used by the following passes.
        """
        if not self.spectral_norm:
            raise ConfigurationError("spectral normalisation is disabled for this model")
        if self.frozen:
            raise FrozenModelError("cannot refresh spectral estimates of a frozen snapshot")
        iters = self.power_iters if n_iters is None else int(n_iters)
        for i in range(self.n_layers):
            sigma, u, _ = power_iteration_sigma_max(
                self.weight(i), iters, rng=self._sn_rng, u0=self._u[i]
            )
            self._u[i] = u
            self._sigma[i] = sigma
        logger.debug("Spectral estimates refreshed", sigmas=self._sigma.tolist(), iters=iters)
        return [self.effective_weight(i) for i in range(self.n_layers)]

    # -- forward / backward -----------------------------------------------------------

    def _phi(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Activation, first and second derivative."""
        if self.activation == "tanh":
            t = np.tanh(Z)
            d1 = 1.0 - t**2
            return t, d1, -2.0 * t * d1
        pos = Z > 0
        a = np.where(pos, Z, self.leaky_slope * Z)
        d1 = np.where(pos, 1.0, self.leaky_slope)
        return a, d1, np.zeros_like(Z)

    def _forward(self, X: np.ndarray):
        acts = [X]
        pre = []
        A = X
        for i in range(self.n_layers):
            Z = A @ self.effective_weight(i).T + self.bias(i)
            pre.append(Z)
            if i < self.n_layers - 1:
                A = self._phi(Z)[0]
                acts.append(A)
        return acts, pre

    def _backward(self, X: np.ndarray):
        """Per-layer output deltas ∂E/∂z and the input gradient ∂E/∂x."""
        acts, pre = self._forward(X)
        deltas: list[np.ndarray] = [np.empty(0)] * self.n_layers
        delta = np.ones((X.shape[0], 1))
        for i in reversed(range(self.n_layers)):
            deltas[i] = delta
            grad_in = delta @ self.effective_weight(i)
            if i > 0:
                delta = grad_in * self._phi(pre[i - 1])[1]
        return acts, pre, deltas, grad_in

    def _energy(self, X: np.ndarray) -> np.ndarray:
        return self._forward(X)[1][-1][:, 0]

    def _score(self, X: np.ndarray) -> np.ndarray:
        return -self._backward(X)[3]

    def _scale(self, i: int) -> float:
        return 1.0 / self._sigma[i] if self.spectral_norm else 1.0

    def _param_grad(self, X: np.ndarray) -> np.ndarray:
        acts, _, deltas, _ = self._backward(X)
        n = X.shape[0]
        blocks = []
        for i in range(self.n_layers):
            gW = np.einsum("no,ni->noi", deltas[i], acts[i]) * self._scale(i)
            blocks.append(gW.reshape(n, -1))
            blocks.append(deltas[i])
        return np.hstack(blocks)

    def _weighted_param_grad(self, X: np.ndarray, w: np.ndarray) -> np.ndarray:
        acts, _, deltas, _ = self._backward(X)
        blocks = []
        for i in range(self.n_layers):
            wd = deltas[i] * w[:, None]
            blocks.append((wd.T @ acts[i]).ravel() * self._scale(i))
            blocks.append(wd.sum(axis=0))
        return np.concatenate(blocks)

    def _score_vjp(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        # forward tangent along G, then reverse through the (value, tangent) pair
        acts, pre = self._forward(X)
        tangents = [G]
        dpre = []
        T = G
        for i in range(self.n_layers):
            dZ = T @ self.effective_weight(i).T
            dpre.append(dZ)
            if i < self.n_layers - 1:
                T = self._phi(pre[i])[1] * dZ
                tangents.append(T)

        n = X.shape[0]
        blocks: list[np.ndarray] = []
        adj_z = np.zeros((n, 1))
        adj_dz = np.ones((n, 1))
        for i in reversed(range(self.n_layers)):
            gW = np.einsum("no,ni->noi", adj_z, acts[i]) + np.einsum(
                "no,ni->noi", adj_dz, tangents[i]
            )
            blocks.append(adj_z)
            blocks.append((gW * self._scale(i)).reshape(n, -1))
            if i > 0:
                W = self.effective_weight(i)
                adj_a = adj_z @ W
                adj_da = adj_dz @ W
                _, d1, d2 = self._phi(pre[i - 1])
                adj_dz = d1 * adj_da
                adj_z = d1 * adj_a + d2 * dpre[i - 1] * adj_da
        blocks.reverse()
        return -np.hstack(blocks)

    # -- serialisation ----------------------------------------------------------------

    def config_dict(self) -> dict[str, Any]:
        return {
            "layer_widths": self.layer_widths,
            "leaky_slope": self.leaky_slope,
            "spectral_norm": self.spectral_norm,
            "power_iters": self.power_iters,
            "activation": self.activation,
        }

    def extra_state(self) -> dict[str, Any]:
        if not self.spectral_norm:
            return {}
        return {
            "sn_u": [None if u is None else u.tolist() for u in self._u],
            "sn_sigma": self._sigma.tolist(),
            "sn_rng": self._sn_rng.state(),
        }

    def load_extra_state(self, state: dict[str, Any]) -> None:
        if not state:
            return
        u_list = state["sn_u"]
        if len(u_list) != self.n_layers:
            raise DimensionMismatchError("spectral warm-start vectors do not match the layer count")
        self._u = [None if u is None else np.asarray(u, dtype=float) for u in u_list]
        self._sigma = np.asarray(state["sn_sigma"], dtype=float)
        self._sn_rng = Rng.from_state(state["sn_rng"])

    @classmethod
    def from_config(cls, config: dict[str, Any], theta: np.ndarray) -> "MlpEnergy":
        return cls(
            config["layer_widths"],
            leaky_slope=config.get("leaky_slope", 0.2),
            spectral_norm=config.get("spectral_norm", False),
            power_iters=config.get("power_iters", 1),
            activation=config.get("activation", "leaky_relu"),
            theta=np.asarray(theta, dtype=float),
        )
