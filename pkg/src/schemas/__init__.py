from src.schemas.evaluation import EvalRow, GridAxis, GridSpec
from src.schemas.run import ModelConfig, OutputSection, RunConfig, TargetConfig, TrainSection
from src.schemas.sampling import (
    CHAIN_PRESETS,
    BufferConfig,
    ChainConfig,
    ChainOverrides,
    SamplerSection,
    chain_preset,
)
from src.schemas.training import (
    OBJECTIVE_NAMES,
    NoiseDistConfig,
    ObjectiveConfig,
    OptimizerConfig,
    TrainConfig,
)

__all__ = [
    "BufferConfig",
    "CHAIN_PRESETS",
    "ChainConfig",
    "ChainOverrides",
    "EvalRow",
    "GridAxis",
    "GridSpec",
    "ModelConfig",
    "NoiseDistConfig",
    "OBJECTIVE_NAMES",
    "ObjectiveConfig",
    "OptimizerConfig",
    "OutputSection",
    "RunConfig",
    "SamplerSection",
    "TargetConfig",
    "TrainConfig",
    "TrainSection",
    "chain_preset",
]
