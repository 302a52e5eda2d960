import hashlib
import json
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.schemas.sampling import SamplerSection
from src.schemas.training import ObjectiveConfig, OptimizerConfig, TrainConfig

TargetName = Literal["gaussian", "two_modes_1d", "four_modes", "mixture"]


class TargetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: TargetName = "four_modes"
    parameters: dict[str, Any] = Field(default_factory=dict)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["mlp", "gaussian", "mixture"] = "mlp"
    widths: Optional[list[int]] = None
    spectral_norm: bool = False
    leaky_slope: float = Field(0.2, gt=0.0, lt=1.0)
    activation: Literal["leaky_relu", "tanh"] = "leaky_relu"
    power_iters: int = Field(1, ge=1)
    n_components: int = Field(4, ge=1)


class TrainSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(1000, ge=1)
    batch_size: int = Field(128, ge=1)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    seed: int = 0
    nu_log_interval: int = Field(10, ge=1)
    checkpoint_interval: int = Field(0, ge=0)


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    record_wall_time: bool = False
    n_final_samples: int = Field(1000, ge=0)


class RunConfig(BaseModel):
    """One experiment: every section rejects unknown keys."""

    model_config = ConfigDict(extra="forbid")

    target: TargetConfig = Field(default_factory=TargetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    objective: ObjectiveConfig = Field(default_factory=ObjectiveConfig)
    sampler: SamplerSection = Field(default_factory=SamplerSection)
    train: TrainSection = Field(default_factory=TrainSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            objective=self.objective,
            iterations=self.train.iterations,
            batch_size=self.train.batch_size,
            optimizer=self.train.optimizer,
            langevin=self.sampler.chain(),
            buffer=self.sampler.buffer,
            seed=self.train.seed,
            nu_log_interval=self.train.nu_log_interval,
            checkpoint_interval=self.train.checkpoint_interval,
            record_wall_time=self.output.record_wall_time,
        )

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]
