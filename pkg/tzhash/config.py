"""
Application settings loaded from environment variables, and loaders for the
flat ``key=value`` experiment files.
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional, Type, TypeVar

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigurationError
from .schemas.config import SynthSpec, TrainConfig

M = TypeVar("M", bound=BaseModel)


class Settings(BaseSettings):
    """Runtime settings with validation."""

    model_config = SettingsConfigDict(
        env_prefix="TZSH_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Server
    host: str = "127.0.0.1"
    port: int = 8000
    debug: bool = False

    log_level: str = "INFO"

    # Search service
    checkpoint_path: Optional[str] = None
    codes_path: Optional[str] = None
    max_code_bits: int = 1024

    # Training output
    record_wall_time: bool = False

    @field_validator("log_level")
    @classmethod
    def upper_level(cls, v: str) -> str:
        return v.upper()


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


def _load_flat(path: str | Path, model: Type[M]) -> M:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values = {k: v for k, v in dotenv_values(path).items() if v is not None}
    try:
        return model.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"{path}: {problems}") from e


def load_train_config(path: str | Path) -> TrainConfig:
    return _load_flat(path, TrainConfig)


def load_synth_spec(path: str | Path) -> SynthSpec:
    return _load_flat(path, SynthSpec)


def dump_flat(model: BaseModel) -> str:
    """Render a config back to ``key=value`` lines (lists comma-joined, unset keys omitted)."""
    lines = []
    for key, value in model.model_dump().items():
        if value is None:
            continue
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"
