from __future__ import annotations

from typing import Any

import numpy as np

from src.models.base import EnergyModel
from src.objectives.base import GradEstimate, check_batch


def mle_grad(model: EnergyModel, data_batch: Any, model_batch: Any) -> GradEstimate:
    """
    Likelihood gradient estimate E_model[∇θE] - E_data[∇θE].

    This is an ascent direction. ``loss_value`` is the energy gap
    mean E(data) - mean E(model), a surrogate whose descent gradient is ``-grad``.
    """
    Xd = check_batch(model, data_batch, "data_batch")
    Xm = check_batch(model, model_batch, "model_batch")
    nd, nm = Xd.shape[0], Xm.shape[0]
    grad = model.weighted_param_grad(Xm, np.full(nm, 1.0 / nm)) - model.weighted_param_grad(
        Xd, np.full(nd, 1.0 / nd)
    )
    loss = float(np.mean(model.energy(Xd)) - np.mean(model.energy(Xm)))
    return GradEstimate(
        loss_value=loss,
        grad=grad,
        batch_sizes={"data": nd, "model": nm},
        direction="ascent",
    )
