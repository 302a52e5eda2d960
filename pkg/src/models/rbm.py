"""
Binary restricted Boltzmann machine with ±1 units.

As an :class:`EnergyModel` the RBM exposes its visible free energy
``F(v) = -aᵀv - Σ_j log(2 cosh(Wᵀv + b)_j)``, so ``p(v) ∝ exp(-F(v))`` on the
hypercube. ``score`` is the gradient of the continuous extension of ``F``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.config import settings
from src.exceptions import DimensionMismatchError, EnumerationTooLargeError, InvalidStateError
from src.models.base import EnergyModel, ParamLayout
from src.numerics import Rng, logsumexp, sigmoid

LOG_2 = float(np.log(2.0))


class Rbm(EnergyModel):
    kind = "rbm"

    def __init__(self, W: Any, a: Any, b: Any):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        a = np.asarray(a, dtype=float).reshape(-1)
        b = np.asarray(b, dtype=float).reshape(-1)
        n_visible, n_hidden = W.shape
        if a.shape[0] != n_visible or b.shape[0] != n_hidden:
            raise DimensionMismatchError(
                f"biases a {a.shape} / b {b.shape} do not match W {W.shape}"
            )
        layout = ParamLayout(
            [("W", (n_visible, n_hidden)), ("a", (n_visible,)), ("b", (n_hidden,))]
        )
        super().__init__(n_visible, layout, np.concatenate([W.ravel(), a, b]))
        self.n_visible = n_visible
        self.n_hidden = n_hidden

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, rng: Rng, scale: float = 0.5) -> "Rbm":
        return cls(
            rng.normal(size=(n_visible, n_hidden), scale=scale),
            rng.normal(size=n_visible, scale=scale),
            rng.normal(size=n_hidden, scale=scale),
        )

    @property
    def W(self) -> np.ndarray:
        return self.tensor("W")

    @property
    def a(self) -> np.ndarray:
        return self.tensor("a")

    @property
    def b(self) -> np.ndarray:
        return self.tensor("b")

    def joint_energy(self, v: Any, h: Any) -> Any:
        """E(v, h) = -(vᵀWh + aᵀv + bᵀh)."""
        V = check_spins(v, self.n_visible, "v")
        H = check_spins(h, self.n_hidden, "h")
        out = -(np.einsum("ni,ij,nj->n", V, self.W, H) + V @ self.a + H @ self.b)
        return float(out[0]) if np.ndim(v) == 1 else out

    def _energy(self, X: np.ndarray) -> np.ndarray:
        c = X @ self.W + self.b
        return -(X @ self.a) - np.sum(np.logaddexp(c, -c), axis=1)

    def _score(self, X: np.ndarray) -> np.ndarray:
        return self.a + np.tanh(X @ self.W + self.b) @ self.W.T

    def _param_grad(self, X: np.ndarray) -> np.ndarray:
        t = np.tanh(X @ self.W + self.b)
        gW = -np.einsum("ni,nj->nij", X, t).reshape(X.shape[0], -1)
        return np.hstack([gW, -X, -t])

    def config_dict(self) -> dict[str, Any]:
        return {"n_visible": self.n_visible, "n_hidden": self.n_hidden}

    @classmethod
    def from_config(cls, config: dict[str, Any], theta: np.ndarray) -> "Rbm":
        nv, nh = int(config["n_visible"]), int(config["n_hidden"])
        model = cls(np.zeros((nv, nh)), np.zeros(nv), np.zeros(nh))
        model.set_params(theta)
        return model


def check_spins(x: Any, n: int, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.shape[1] != n:
        raise DimensionMismatchError(f"{name} must have {n} units, got shape {arr.shape}")
    if not np.all(np.isin(arr, (-1.0, 1.0))):
        raise InvalidStateError(f"{name} entries must be -1 or +1")
    return arr


def rbm_conditionals(rbm: Rbm, v: Any = None, h: Any = None) -> np.ndarray:
    """
    Probability that each unit of the missing layer is +1, given the other layer.

    p(v_i=+1|h) = σ(2 Σ_j w_ij h_j + 2 a_i);  p(h_j=+1|v) = σ(2 Σ_i w_ij v_i + 2 b_j).
    """
    if (v is None) == (h is None):
        raise InvalidStateError("exactly one of v and h must be supplied")
    if v is not None:
        V = check_spins(v, rbm.n_visible, "v")
        out = sigmoid(2.0 * (V @ rbm.W) + 2.0 * rbm.b)
        single = np.ndim(v) == 1
    else:
        H = check_spins(h, rbm.n_hidden, "h")
        out = sigmoid(2.0 * (H @ rbm.W.T) + 2.0 * rbm.a)
        single = np.ndim(h) == 1
    return out[0] if single else out


def spin_states(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n))).reshape(-1, n)


@dataclass(frozen=True)
class RbmMarginal:
    states: np.ndarray
    probs: np.ndarray

    def index_of(self, v: Any) -> int:
        row = np.asarray(v, dtype=float)
        return int(np.flatnonzero(np.all(self.states == row, axis=1))[0])

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(s) for s in st): float(p) for st, p in zip(self.states, self.probs)}


def rbm_joint_log_table(rbm: Rbm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Visible states, hidden states and the normalised joint log-probability grid."""
    n_units = rbm.n_visible + rbm.n_hidden
    if n_units > settings.ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(n_units, settings.ENUMERATION_LIMIT)
    vs = spin_states(rbm.n_visible)
    hs = spin_states(rbm.n_hidden)
    log_w = vs @ rbm.W @ hs.T + (vs @ rbm.a)[:, None] + (hs @ rbm.b)[None, :]
    return vs, hs, log_w - logsumexp(log_w)


def rbm_exact_marginal(rbm: Rbm) -> RbmMarginal:
    """p(v) = Σ_h e^{-E(v,h)} / Z over every visible state, by full enumeration."""
    vs, _, log_joint = rbm_joint_log_table(rbm)
    log_pv = logsumexp(log_joint, axis=1)
    probs = np.exp(log_pv)
    return RbmMarginal(states=vs, probs=probs / probs.sum())
