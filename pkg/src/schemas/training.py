from typing import Literal, Optional, get_args

from pydantic import BaseModel, ConfigDict, Field

from src.schemas.sampling import BufferConfig, ChainConfig, chain_preset

ObjectiveName = Literal[
    "adance",
    "adabrm",
    "mle",
    "nce",
    "nce_rank",
    "cnce",
    "brm",
    "sm_implicit",
    "sm_denoising",
    "sm_sliced",
]

OBJECTIVE_NAMES: tuple[str, ...] = get_args(ObjectiveName)


class NoiseDistConfig(BaseModel):
    """Fixed Gaussian noise distribution for the NCE and BRM families."""

    model_config = ConfigDict(extra="forbid")

    mean: Optional[list[float]] = None
    std: float = Field(2.0, gt=0.0)


class ObjectiveConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: ObjectiveName = "adance"
    adaptive_interval: int = Field(1, ge=1)
    spair: str = "log"
    v: float = Field(1.0, gt=0.0)
    sigma: float = Field(0.1, gt=0.0)
    kappa: int = Field(1, ge=1)
    collection_size: int = Field(4, ge=2)
    n_projections: int = Field(1, ge=1)
    projection_dist: Literal["rademacher", "gaussian"] = "rademacher"
    noise: NoiseDistConfig = Field(default_factory=NoiseDistConfig)


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["sgd", "adam"] = "adam"
    lr: float = Field(1e-4, gt=0.0)
    beta1: float = Field(0.0, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    objective: ObjectiveConfig = Field(default_factory=ObjectiveConfig)
    iterations: int = Field(1000, ge=1)
    batch_size: int = Field(128, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    langevin: ChainConfig = Field(default_factory=lambda: chain_preset("matched"))
    buffer: BufferConfig = Field(default_factory=BufferConfig)
    seed: int = 0
    nu_log_interval: int = Field(10, ge=1)
    checkpoint_interval: int = Field(0, ge=0)
    record_wall_time: bool = False

    @property
    def adaptive_interval(self) -> int:
        return self.objective.adaptive_interval
