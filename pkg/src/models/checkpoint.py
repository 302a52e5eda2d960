from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from src.exceptions import CheckpointFormatError
from src.logging_config import get_logger
from src.models.base import EnergyModel
from src.models.gaussian import AnalyticGaussianEnergy
from src.models.mixture import GaussianMixtureEnergy
from src.models.mlp import MlpEnergy
from src.models.rbm import Rbm
from src.numerics import Rng

logger = get_logger(__name__)

CHECKPOINT_FORMAT = "ebm-lab-checkpoint"
CHECKPOINT_VERSION = 1

MODEL_REGISTRY: dict[str, type[EnergyModel]] = {
    AnalyticGaussianEnergy.kind: AnalyticGaussianEnergy,
    GaussianMixtureEnergy.kind: GaussianMixtureEnergy,
    MlpEnergy.kind: MlpEnergy,
    Rbm.kind: Rbm,
}


def checkpoint_dict(
    model: EnergyModel, rng: Rng | None = None, metadata: dict[str, Any] | None = None
) -> dict[str, Any]:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.kind,
        "config": model.config_dict(),
        "layout": model.layout.to_list(),
        "params": [float(p) for p in model.params],
        "extra": model.extra_state(),
        "rng": rng.state() if rng is not None else None,
        "metadata": metadata or {},
    }


def save_checkpoint(
    model: EnergyModel,
    path: str | Path,
    rng: Rng | None = None,
    metadata: dict[str, Any] | None = None,
) -> Path:
    """Write a JSON checkpoint. Floats are stored with round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = checkpoint_dict(model, rng, metadata)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info("Checkpoint written", path=str(path), kind=model.kind, n_params=model.n_params)
    return path


def model_from_dict(payload: dict[str, Any]) -> tuple[EnergyModel, Rng | None, dict[str, Any]]:
    if not isinstance(payload, dict):
        raise CheckpointFormatError("checkpoint root must be a JSON object")
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointFormatError(f"unexpected format marker {payload.get('format')!r}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {payload.get('version')!r}")
    for key in ("kind", "config", "layout", "params"):
        if key not in payload:
            raise CheckpointFormatError(f"checkpoint is missing the '{key}' section")
    kind = payload["kind"]
    if kind not in MODEL_REGISTRY:
        raise CheckpointFormatError(f"unknown model kind {kind!r}")

    try:
        theta = np.asarray(payload["params"], dtype=float)
        model = MODEL_REGISTRY[kind].from_config(payload["config"], theta)
        model.load_extra_state(payload.get("extra") or {})
        rng = Rng.from_state(payload["rng"]) if payload.get("rng") else None
    except CheckpointFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointFormatError(f"malformed {kind} checkpoint: {e}") from e

    if model.layout.to_list() != payload["layout"]:
        raise CheckpointFormatError("stored layout does not match the rebuilt model")
    return model, rng, payload.get("metadata") or {}


def load_checkpoint(path: str | Path) -> tuple[EnergyModel, Rng | None, dict[str, Any]]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise CheckpointFormatError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    model, rng, metadata = model_from_dict(payload)
    logger.info("Checkpoint loaded", path=str(path), kind=model.kind)
    return model, rng, metadata
