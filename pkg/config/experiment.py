"""Experiment configuration: kernels, architecture and training protocol.

Every model here forbids unknown keys. A typo in a sweep config must fail
loudly instead of silently falling back to a default.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.settings import Settings
from core.errors import ConfigError


SWEEPABLE_PARAMS = ("lambda", "rel_sigma", "sigma")


class KernelConfig(BaseModel):
    """Bandwidth selection and tensor-kernel parameters."""

    model_config = ConfigDict(extra="forbid")

    rel_sigma: float = Field(0.15, gt=0, description="sigma as a fraction of the median pairwise distance")
    subspace_rank: int = Field(2, ge=1, description="Truncation rank of each unfolding's subspace")
    min_sigma: float = Field(1e-9, gt=0, description="Lower bound on sigma")
    fixed_sigma: Optional[float] = Field(None, gt=0, description="Bypasses the median rule when set")
    subspace_method: Literal["svd", "gram"] = Field(
        "svd", description="svd: rank-r singular-subspace projectors; gram: unit-Frobenius Gram matrices"
    )
    tensor_sigma_source: Literal["flattened", "subspace"] = "flattened"


class ConvBlockSpec(BaseModel):
    """conv -> activation -> max-pool -> batch-norm."""

    model_config = ConfigDict(extra="forbid")

    channels: int = Field(..., ge=1)
    kernel_size: int = Field(5, ge=1)
    pool: int = Field(2, ge=1)
    batch_norm: bool = True
    activation: Literal["relu"] = "relu"


class ArchitectureSpec(BaseModel):
    """Serializable description of the backbone and the clustering head."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["cnn", "rnn"]
    conv_blocks: List[ConvBlockSpec] = Field(default_factory=list)
    rnn_hidden_size: int = Field(32, ge=1, description="Per-direction state size")
    rnn_layers: int = Field(2, ge=1)
    bidirectional: bool = True
    hidden_units: int = Field(100, ge=1, description="Width of the representation the main kernel sees")
    hidden_batch_norm: bool = True

    @field_validator("conv_blocks")
    @classmethod
    def validate_blocks(cls, v, info):
        if info.data.get("kind") == "cnn" and not v:
            raise ValueError("a cnn architecture needs at least one conv block")
        return v

    @property
    def n_taps(self) -> int:
        return len(self.conv_blocks) if self.kind == "cnn" else self.rnn_layers


class TrainConfig(BaseModel):
    """All knobs of one experiment. Mirrors the JSON config file field for field."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    batch_size: int = Field(120, ge=2, description="Kernels need at least one pair")
    epochs: int = Field(100, ge=0)
    learning_rate: float = Field(1e-3, gt=0)
    optimizer: Literal["adam"] = "adam"
    n_runs: int = Field(20, ge=1)
    seed: int = 0
    companion_lambda: float = Field(0.0, ge=0, alias="lambda")
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    architecture: Optional[ArchitectureSpec] = None
    dataset: Optional[str] = Field(None, description="Path of a dataset directory")
    n_clusters: Optional[int] = Field(None, ge=2, description="Defaults to the dataset's k")
    companion_layers: Optional[List[bool]] = Field(None, description="Per-tap enable flags; all on when omitted")
    term_weights: List[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])

    @field_validator("term_weights")
    @classmethod
    def validate_term_weights(cls, v):
        if len(v) != 3 or any(w < 0 for w in v):
            raise ValueError("term_weights must be three nonnegative numbers")
        return v

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)

    def with_override(self, param: str, value: float) -> "TrainConfig":
        """Copy of this config with one sweepable parameter replaced."""
        data = self.to_dict()
        if param == "lambda":
            data["lambda"] = value
        elif param == "rel_sigma":
            data["kernel"]["rel_sigma"] = value
        elif param == "sigma":
            data["kernel"]["fixed_sigma"] = value
        else:
            raise ConfigError(f"Parameter '{param}' is not sweepable; choose from {SWEEPABLE_PARAMS}", field=param)
        return parse_train_config(data)


def parse_train_config(data: Union[Dict[str, Any], str]) -> TrainConfig:
    """Validate a dict (or JSON text) into a TrainConfig, raising ConfigError."""
    try:
        if isinstance(data, str):
            return TrainConfig.model_validate_json(data)
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid config: {problems}") from e


def apply_environment_overrides(cfg: TrainConfig, env: Optional[Settings] = None) -> TrainConfig:
    """Apply ``DTKC_SEED`` when it is set."""
    env = env or Settings()
    if env.seed is not None and env.seed != cfg.seed:
        logger.info(f"DTKC_SEED overrides config seed {cfg.seed} -> {env.seed}")
        data = cfg.to_dict()
        data["seed"] = env.seed
        return parse_train_config(data)
    return cfg


def load_train_config(path: Path, env: Optional[Settings] = None) -> TrainConfig:
    """Load, validate and environment-override a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}", field=str(path)) from e
    try:
        json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}", field=str(path)) from e

    cfg = apply_environment_overrides(parse_train_config(text), env)
    logger.debug(f"Loaded config from {path}")
    return cfg


def save_train_config(cfg: TrainConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
