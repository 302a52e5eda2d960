from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

NoiseMode = Literal["matched", "decoupled"]
PresetName = Literal["matched", "paper"]


class ChainConfig(BaseModel):
    """Langevin and HMC settings; a step size of zero is allowed for degenerate test chains."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    steps: int = Field(100, ge=0)
    step_size: float = Field(0.01, ge=0.0)
    noise_mode: NoiseMode = "matched"
    noise_scale: Optional[float] = Field(None, ge=0.0)
    metropolis_adjust: bool = False
    thin: int = Field(1, ge=1)
    leapfrog_steps: int = Field(10, ge=1)
    leapfrog_eps: float = Field(0.1, gt=0.0)
    mass: Optional[list[list[float]]] = None

    @model_validator(mode="after")
    def check_noise(self) -> "ChainConfig":
        if self.noise_mode == "decoupled" and self.noise_scale is None:
            raise ValueError("decoupled noise mode requires noise_scale")
        if self.mass is not None:
            M = np.asarray(self.mass, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ValueError("mass must be a square matrix")
            if not np.allclose(M, M.T) or np.any(np.linalg.eigvalsh(0.5 * (M + M.T)) <= 0):
                raise ValueError("mass must be symmetric positive definite")
        return self

    @property
    def noise_std(self) -> float:
        if self.noise_mode == "matched":
            return float(np.sqrt(self.step_size))
        return float(self.noise_scale or 0.0)

    def mass_matrix(self, dim: int) -> np.ndarray:
        if self.mass is None:
            return np.eye(dim)
        M = np.asarray(self.mass, dtype=float)
        if M.shape != (dim, dim):
            raise ValueError(f"mass matrix is {M.shape}, model dimension is {dim}")
        return M


CHAIN_PRESETS: dict[str, dict[str, Any]] = {
    "matched": {"steps": 100, "step_size": 0.01, "noise_mode": "matched"},
    "paper": {"steps": 100, "step_size": 1.0, "noise_mode": "decoupled", "noise_scale": 0.005},
}


class ChainOverrides(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: Optional[int] = Field(None, ge=0)
    step_size: Optional[float] = Field(None, ge=0.0)
    noise_mode: Optional[NoiseMode] = None
    noise_scale: Optional[float] = Field(None, ge=0.0)
    metropolis_adjust: Optional[bool] = None
    thin: Optional[int] = Field(None, ge=1)
    leapfrog_steps: Optional[int] = Field(None, ge=1)
    leapfrog_eps: Optional[float] = Field(None, gt=0.0)
    mass: Optional[list[list[float]]] = None


def chain_preset(name: PresetName, overrides: Optional[ChainOverrides] = None) -> ChainConfig:
    if name not in CHAIN_PRESETS:
        raise ValueError(f"unknown sampler preset '{name}'")
    fields = dict(CHAIN_PRESETS[name])
    if overrides is not None:
        fields.update(overrides.model_dump(exclude_none=True))
    return ChainConfig(**fields)


class BufferConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    capacity: int = Field(10000, ge=1)
    rejuvenation_rate: float = Field(0.25, ge=0.0, le=1.0)
    prior: Literal["uniform_box", "gaussian"] = "uniform_box"
    prior_margin: float = Field(0.0, ge=0.0)
    reset_on_refresh: bool = False


class SamplerSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: PresetName = "matched"
    overrides: ChainOverrides = Field(default_factory=ChainOverrides)
    buffer: BufferConfig = Field(default_factory=BufferConfig)

    def chain(self) -> ChainConfig:
        return chain_preset(self.preset, self.overrides)
