from typing import Literal

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False, extra="ignore")

    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["json", "text"] = "json"

    OUTPUT_ROOT: str = "runs"
    DEFAULT_SEED: int = 0
    CLAIMS_LEDGER_PATH: str = "claims_ledger.json"

    METRICS_ENABLED: bool = True

    # Numerical guards
    DIVERGENCE_SCORE_LIMIT: float = 1e6
    RATIO_OVERFLOW_LIMIT: float = 1e300
    EXP_CLAMP: float = 300.0
    HESSIAN_FD_STEP: float = 1e-4

    # Enumeration / quadrature limits
    ENUMERATION_LIMIT: int = 20
    GRID_MAX_DIM: int = 3

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def normalize_log_level(cls, v):
        """Accept lower-case level names from the environment."""
        if isinstance(v, str):
            return v.strip().upper()
        return v


settings = Settings()
