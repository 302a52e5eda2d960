from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from src.models.base import EnergyModel


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    nu: float
    energies: list[float] = field(default_factory=list)
    nu_history: list[float] = field(default_factory=list)
    delta_hamiltonian: list[float] = field(default_factory=list)
    rejected_nonfinite: int = 0

    def __post_init__(self):
        if not 0.0 <= self.acceptance_rate <= 1.0:
            raise ValueError(f"acceptance rate {self.acceptance_rate} outside [0, 1]")
        if self.nu < 0:
            raise ValueError("nu must be non-negative")


def grad_magnitude_nu(model: EnergyModel, path: Sequence[Any] | np.ndarray) -> float:
    """Mean Euclidean norm of ∇ₓE along a sample path."""
    P = np.asarray(path, dtype=float)
    if P.size == 0:
        raise ValueError("path must be non-empty")
    P = P.reshape(-1, model.dim)
    return float(np.mean(np.linalg.norm(model.score(P), axis=1)))


def write_trace_csv(
    path: str | Path, model: EnergyModel, points: np.ndarray, steps: Sequence[int] | None = None
) -> Path:
    """Chain trace with columns step, x0..x{d-1}, energy, score_norm."""
    P = np.asarray(points, dtype=float).reshape(-1, model.dim)
    steps = list(range(P.shape[0])) if steps is None else list(steps)
    energies = np.atleast_1d(model.energy(P)) if P.shape[0] else np.empty(0)
    norms = np.linalg.norm(model.score(P), axis=1) if P.shape[0] else np.empty(0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", *[f"x{i}" for i in range(model.dim)], "energy", "score_norm"])
        for k, row, e, s in zip(steps, P, energies, norms):
            writer.writerow([k, *[repr(float(v)) for v in row], repr(float(e)), repr(float(s))])
    return path
