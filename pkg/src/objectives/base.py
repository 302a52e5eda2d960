from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from src.exceptions import DimensionMismatchError, FrozenModelError, InsufficientSamplesError
from src.models.base import EnergyModel


@dataclass
class GradEstimate:
    """
    Loss value and parameter gradient of one objective evaluation.

    ``grad`` is over the model's flat parameters; ``grad_c`` is the gradient
    with respect to the learnable log-partition scalar when the objective has one.
    ``direction`` is "descent" when ``grad`` should be subtracted by an optimiser.
    """

    loss_value: float
    grad: np.ndarray
    batch_sizes: dict[str, int]
    grad_c: float | None = None
    direction: Literal["descent", "ascent"] = "descent"
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def full_grad(self) -> np.ndarray:
        if self.grad_c is None:
            return self.grad
        return np.append(self.grad, self.grad_c)

    @property
    def descent_grad(self) -> np.ndarray:
        g = self.full_grad
        return g if self.direction == "descent" else -g

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.full_grad))


def check_batch(model: EnergyModel, batch: Any, name: str) -> np.ndarray:
    X = np.asarray(batch, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, model.dim) if model.dim > 1 else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatchError(
            f"{name} has shape {np.shape(batch)}, model dimension is {model.dim}"
        )
    if X.shape[0] == 0:
        raise InsufficientSamplesError(0, required=1)
    return X


def check_frozen(model: EnergyModel, frozen: EnergyModel) -> None:
    if frozen is model or not frozen.frozen or model.shares_parameters_with(frozen):
        raise FrozenModelError()
    if frozen.dim != model.dim:
        raise DimensionMismatchError("frozen model and trained model differ in dimension")
