from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any

import numpy as np

from src.exceptions import DimensionMismatchError, NonFiniteGradientError
from src.schemas.training import OptimizerConfig


class Optimizer(ABC):
    """Stateful first-order optimiser over a flat parameter vector (descent convention)."""

    def __init__(self, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = float(lr)
        self.t = 0

    def step(self, params: Any, grad: Any, iteration: int | None = None) -> np.ndarray:
        p = np.asarray(params, dtype=float)
        g = np.asarray(grad, dtype=float)
        if p.shape != g.shape:
            raise DimensionMismatchError(f"params {p.shape} and grad {g.shape} differ in shape")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(self.t + 1 if iteration is None else iteration)
        self.t += 1
        return self._update(p, g)

    @abstractmethod
    def _update(self, p: np.ndarray, g: np.ndarray) -> np.ndarray: ...

    def state_dict(self) -> dict[str, Any]:
        return {"t": self.t}


class Sgd(Optimizer):
    def _update(self, p: np.ndarray, g: np.ndarray) -> np.ndarray:
        return p - self.lr * g


class Adam(Optimizer):
    def __init__(
        self, lr: float = 1e-4, beta1: float = 0.0, beta2: float = 0.999, eps: float = 1e-8
    ):
        super().__init__(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: np.ndarray | None = None
        self.v: np.ndarray | None = None

    def _update(self, p: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.m is None or self.m.shape != g.shape:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        assert self.v is not None
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return p - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict[str, Any]:
        return {
            "t": self.t,
            "m": None if self.m is None else self.m.tolist(),
            "v": None if self.v is None else self.v.tolist(),
        }


def build_optimizer(cfg: OptimizerConfig) -> Optimizer:
    if cfg.name == "sgd":
        return Sgd(cfg.lr)
    return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
