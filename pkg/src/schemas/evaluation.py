from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

MetricName = Literal["frechet", "loglik", "grid_kl"]


class GridAxis(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lo: float
    hi: float
    n_points: int = Field(128, ge=16)

    @model_validator(mode="after")
    def check_bounds(self) -> "GridAxis":
        if not self.lo < self.hi:
            raise ValueError(f"grid axis needs lo < hi, got [{self.lo}, {self.hi}]")
        return self

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    axes: list[GridAxis] = Field(min_length=1)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float, n_points: int = 128) -> "GridSpec":
        return cls(axes=[GridAxis(lo=lo, hi=hi, n_points=n_points) for _ in range(dim)])


class EvalRow(BaseModel):
    run_id: str
    metric: str
    value: float
    config_hash: str


class Claim(BaseModel):
    """One acceptance threshold; ``provisional`` until a pilot run has confirmed it."""

    model_config = ConfigDict(extra="forbid")

    threshold: float
    unit: str = ""
    status: Literal["provisional", "calibrated"] = "provisional"
    settings: dict[str, float | int | str] = Field(default_factory=dict)
    notes: str = ""


class ClaimsLedger(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = Field(ge=1)
    claims: dict[str, Claim]

    def threshold(self, name: str) -> float:
        if name not in self.claims:
            raise KeyError(f"claims ledger has no entry '{name}'")
        return self.claims[name].threshold
