"""Process-level settings for DTKC."""

from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix ``DTKC_``)."""

    model_config = SettingsConfigDict(
        env_prefix="DTKC_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Reproducibility
    seed: Optional[int] = Field(None, description="Overrides the experiment seed when set")
    num_threads: int = Field(1, description="torch intra-op threads; 1 keeps runs bit-reproducible")

    # Logging
    log_level: str = Field("INFO", description="Logging level")
    log_dir: Path = Field(Path("./logs"), description="Log directory")

    # Evaluation
    predict_batch_size: int = Field(256, description="Batch size for full-dataset prediction passes")

    # Persistence
    checkpoint_version: int = Field(1, description="Checkpoint manifest format version")

    @field_validator("log_dir", mode="before")
    @classmethod
    def create_log_dir(cls, v):
        """Ensure log directory exists."""
        path = Path(v)
        path.mkdir(parents=True, exist_ok=True)
        return path

    @field_validator("seed", mode="before")
    @classmethod
    def parse_optional_int(cls, v):
        """Empty strings mean 'not set'."""
        if v is None or v == "":
            return None
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        """Validate logging level."""
        allowed = ["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in allowed:
            raise ValueError(f"Log level must be one of: {allowed}")
        return v.upper()

    @field_validator("num_threads", "predict_batch_size")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("must be >= 1")
        return v


# Global settings instance
settings = Settings()
