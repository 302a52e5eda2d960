"""
Shared contract for every energy function in the lab.

A model owns a single flat parameter vector ``theta``; named tensors are
read through :class:`ParamLayout` slices so that snapshots (deep copies with a
read-only ``theta``) never alias the live model.
"""

from __future__ import annotations

import copy
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.config import settings
from src.exceptions import DimensionMismatchError, FrozenModelError, NonFiniteError
from src.logging_config import get_logger

logger = get_logger(__name__)

PARAM_FD_STEP = 1e-6


@dataclass(frozen=True)
class ParamEntry:
    name: str
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1


class ParamLayout:
    """Ordered (name, shape) descriptor of a flat parameter vector."""

    def __init__(self, shapes: list[tuple[str, tuple[int, ...]]]):
        entries = []
        offset = 0
        for name, shape in shapes:
            entry = ParamEntry(name, tuple(int(s) for s in shape), offset)
            entries.append(entry)
            offset += entry.size
        self.entries: tuple[ParamEntry, ...] = tuple(entries)
        self.size = offset
        self._by_name = {e.name: e for e in self.entries}

    def __getitem__(self, name: str) -> ParamEntry:
        return self._by_name[name]

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def view(self, theta: np.ndarray, name: str) -> np.ndarray:
        e = self._by_name[name]
        return theta[e.offset : e.offset + e.size].reshape(e.shape)

    def to_list(self) -> list[dict[str, Any]]:
        return [{"name": e.name, "shape": list(e.shape)} for e in self.entries]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ParamLayout) and self.to_list() == other.to_list()


class EnergyModel(ABC):
    """
    p(x) ∝ exp(-E(x)). Public methods accept one point ``(d,)`` or a batch
    ``(n, d)`` and return results shaped accordingly.
    """

    kind: str = "abstract"

    def __init__(self, dim: int, layout: ParamLayout, theta: np.ndarray | None = None):
        self.dim = int(dim)
        self.layout = layout
        self._theta = np.zeros(layout.size) if theta is None else np.array(theta, dtype=float)
        if self._theta.shape != (layout.size,):
            raise DimensionMismatchError(
                f"parameter vector has length {self._theta.size}, layout needs {layout.size}"
            )
        self.frozen = False

    # -- parameters -----------------------------------------------------------------

    @property
    def params(self) -> np.ndarray:
        return self._theta.copy()

    @property
    def n_params(self) -> int:
        return self.layout.size

    def set_params(self, theta: Any) -> None:
        if self.frozen:
            raise FrozenModelError("snapshot parameters are read-only")
        theta = np.asarray(theta, dtype=float)
        if theta.shape != self._theta.shape:
            raise DimensionMismatchError(
                f"parameter vector has length {theta.size}, expected {self._theta.size}"
            )
        if not np.all(np.isfinite(theta)):
            raise NonFiniteError("parameters contain non-finite entries")
        self._theta[...] = theta

    def tensor(self, name: str) -> np.ndarray:
        return self.layout.view(self._theta, name)

    def shares_parameters_with(self, other: "EnergyModel") -> bool:
        return other is self or np.shares_memory(self._theta, other._theta)

    # -- snapshot -------------------------------------------------------------------

    def snapshot(self) -> "EnergyModel":
        """Frozen deep copy; mutating the original never changes it."""
        snap = copy.deepcopy(self)
        snap._freeze()
        return snap

    def _freeze(self) -> None:
        self.frozen = True
        self._theta.flags.writeable = False

    # -- input handling -------------------------------------------------------------

    def _batch(self, x: Any) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        X = arr.reshape(1, -1) if single else arr
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected input of dimension {self.dim}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise NonFiniteError("input has non-finite entries")
        return X, single

    # -- public evaluation ----------------------------------------------------------

    def energy(self, x: Any) -> Any:
        X, single = self._batch(x)
        E = self._energy(X)
        return float(E[0]) if single else E

    def score(self, x: Any) -> np.ndarray:
        """-∇ₓE(x), the input gradient of the log density."""
        X, single = self._batch(x)
        S = self._score(X)
        return S[0] if single else S

    def param_grad(self, x: Any) -> np.ndarray:
        """∇θE(x) with respect to the flat parameter vector."""
        X, single = self._batch(x)
        G = self._param_grad(X)
        return G[0] if single else G

    def weighted_param_grad(self, x: Any, weights: Any) -> np.ndarray:
        """Σₙ wₙ ∇θE(xₙ)."""
        X, _ = self._batch(x)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != X.shape[0]:
            raise DimensionMismatchError("one weight per sample is required")
        return self._weighted_param_grad(X, w)

    def score_vjp(self, x: Any, directions: Any) -> np.ndarray:
        """∇θ⟨gₙ, score(xₙ)⟩ per sample."""
        X, single = self._batch(x)
        G = np.asarray(directions, dtype=float).reshape(X.shape)
        out = self._score_vjp(X, G)
        return out[0] if single else out

    def laplacian_log_density(self, x: Any) -> Any:
        """Tr ∇ₓ² log p̃(x) = -ΔE(x)."""
        X, single = self._batch(x)
        L = self._laplacian(X)
        return float(L[0]) if single else L

    def laplacian_param_grad(self, x: Any) -> np.ndarray:
        X, single = self._batch(x)
        G = self._laplacian_param_grad(X)
        return G[0] if single else G

    @property
    def has_exact_laplacian(self) -> bool:
        return False

    # -- subclass hooks -------------------------------------------------------------

    @abstractmethod
    def _energy(self, X: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _score(self, X: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _param_grad(self, X: np.ndarray) -> np.ndarray: ...

    def _weighted_param_grad(self, X: np.ndarray, w: np.ndarray) -> np.ndarray:
        return w @ self._param_grad(X)

    def _score_vjp(self, X: np.ndarray, G: np.ndarray) -> np.ndarray:
        # central differences over parameters of <G, score>
        work = self._mutable_copy()
        base = work._theta.copy()
        out = np.empty((X.shape[0], self.n_params))
        for p in range(self.n_params):
            work._theta[p] = base[p] + PARAM_FD_STEP
            plus = np.sum(G * work._score(X), axis=1)
            work._theta[p] = base[p] - PARAM_FD_STEP
            minus = np.sum(G * work._score(X), axis=1)
            work._theta[p] = base[p]
            out[:, p] = (plus - minus) / (2.0 * PARAM_FD_STEP)
        return out

    def _laplacian(self, X: np.ndarray) -> np.ndarray:
        h = settings.HESSIAN_FD_STEP
        total = np.zeros(X.shape[0])
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            total += (self._score(X + e)[:, i] - self._score(X - e)[:, i]) / (2.0 * h)
        return total

    def _laplacian_param_grad(self, X: np.ndarray) -> np.ndarray:
        if self.has_exact_laplacian:
            work = self._mutable_copy()
            base = work._theta.copy()
            out = np.empty((X.shape[0], self.n_params))
            for p in range(self.n_params):
                work._theta[p] = base[p] + PARAM_FD_STEP
                plus = work._laplacian(X)
                work._theta[p] = base[p] - PARAM_FD_STEP
                minus = work._laplacian(X)
                work._theta[p] = base[p]
                out[:, p] = (plus - minus) / (2.0 * PARAM_FD_STEP)
            return out
        h = settings.HESSIAN_FD_STEP
        out = np.zeros((X.shape[0], self.n_params))
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            G = np.tile(np.eye(self.dim)[i], (X.shape[0], 1))
            out += (self._score_vjp(X + e, G) - self._score_vjp(X - e, G)) / (2.0 * h)
        return out

    def _mutable_copy(self) -> "EnergyModel":
        work = copy.deepcopy(self)
        if work.frozen:
            work._theta = work._theta.copy()
            work.frozen = False
        return work

    # -- serialisation --------------------------------------------------------------

    @abstractmethod
    def config_dict(self) -> dict[str, Any]:
        """Constructor arguments needed to rebuild the model (excluding parameters)."""

    @classmethod
    def from_config(cls, config: dict[str, Any], theta: np.ndarray) -> "EnergyModel":
        raise NotImplementedError(f"{cls.__name__} cannot be rebuilt from a checkpoint")

    def extra_state(self) -> dict[str, Any]:
        return {}

    def load_extra_state(self, state: dict[str, Any]) -> None:
        return None

    def __repr__(self) -> str:
        frozen = " frozen" if self.frozen else ""
        return f"<{type(self).__name__} dim={self.dim} params={self.n_params}{frozen}>"


class AnalyticDensity(ABC):
    """A normalised density with an exact log-pdf and a direct sampler."""

    dim: int
    name: str = "analytic"

    @abstractmethod
    def log_pdf(self, x: Any) -> Any: ...

    @abstractmethod
    def sample(self, n: int, rng: Any) -> np.ndarray: ...
