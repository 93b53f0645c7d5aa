"""
Run configuration for the adversarial strings toolkit.

Environment defaults are read through python-dotenv; everything that shapes an
experiment lives in a JSON document validated by pydantic.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .attacks.config import AttackConfig, Projection
from .data.corpus import CorpusSpec
from .errors import ConfigError

load_dotenv()


class Settings(BaseModel):
    """Process-level defaults taken from the environment"""

    log_level: str = "INFO"
    threads: int = 1
    output_dir: str = "./runs"
    progress: bool = True

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            log_level=os.getenv("ADVSTR_LOG_LEVEL", "INFO"),
            threads=int(os.getenv("ADVSTR_THREADS", "1")),
            output_dir=os.getenv("ADVSTR_OUTPUT_DIR", "./runs"),
            progress=os.getenv("ADVSTR_PROGRESS", "true").lower() == "true",
        )


class AutoencoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    embedding_size: int = Field(default=32, ge=1)
    hidden_size: int = Field(default=128, ge=1, description="Latent size d")
    conv_channels: int = Field(default=128, ge=1)
    kernel_width: int = Field(default=5, ge=1, description="Convolution width; stride is always equal")
    max_length: int = Field(default=256, ge=1)
    epochs: int = Field(default=10, ge=1)
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = 0.9
    beta2: float = 0.999
    teacher_forcing: Literal["scheduled", "always"] = "scheduled"
    sampling_probability: float = Field(default=0.5, ge=0, le=1)
    grad_clip: float = Field(default=5.0, ge=0)
    validation_fraction: float = Field(default=0.1, ge=0, lt=1)
    seed: int = 0


class ClassifierConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    aggregator: Literal["attention", "mean_max"] = "attention"
    heads: int = Field(default=8, ge=1)
    hidden_size: int = Field(default=128, ge=1)
    head_hidden: int = Field(default=256, ge=1)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    seed: int = 0


def default_inner_attack() -> AttackConfig:
    return AttackConfig(alpha=1.0, epsilon=10.0, projection=Projection.LINF, iterations=20)


class AdversarialConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["standard", "latent", "full"] = "full"
    inner_attack: AttackConfig = Field(default_factory=default_inner_attack)
    full_alphas: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    latent_alphas: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])


class RuntimeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seeds: List[int] = Field(default_factory=lambda: [0])
    threads: int = Field(default=1, ge=1)
    split_timestamp: Optional[int] = None
    eval_limit: Optional[int] = Field(default=None, ge=1, description="Attack at most this many evaluation bags")
    examples_limit: int = Field(default=10, ge=0)


class ExperimentConfig(BaseModel):
    """Everything a single run needs; echoed into the run manifest"""

    model_config = ConfigDict(extra="forbid")

    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    autoencoder: AutoencoderConfig = Field(default_factory=AutoencoderConfig)
    classifier: ClassifierConfig = Field(default_factory=ClassifierConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    attack_grid: Optional[List[AttackConfig]] = None
    adversarial: AdversarialConfig = Field(default_factory=AdversarialConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply `section.key=value` overrides to a raw config document"""
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep or not path:
            raise ConfigError(f"Override must look like section.key=value, got '{item}'")
        node = document
        keys = path.strip().split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Cannot override inside non-object key '{key}'")
        node[keys[-1]] = _parse_value(raw.strip())
    return document


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """Load a config (or a run manifest, which embeds one) and apply overrides"""
    document: Dict[str, Any] = {}
    if path:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: line {e.lineno}: {e.msg}") from None
        if not isinstance(document, dict):
            raise ConfigError(f"Config file {path} must contain a JSON object")
        if "config" in document and "subcommand" in document:
            logger.info(f"Replaying manifest {path}")
            document = document["config"]
    document = apply_overrides(document, overrides)
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid config: {e}") from None


# Global settings instance
_settings_instance = None


def get_settings() -> Settings:
    """Factory for the environment-derived settings"""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = Settings.from_env()
    return _settings_instance


def reset_settings():
    """Drop cached settings - useful for testing or environment changes"""
    global _settings_instance
    _settings_instance = None
