"""
Engine Configuration Module

Type-safe settings loaded from environment variables (prefix ``ENGINE_``) and an
optional ``.env`` file. Run-specific options live in the run config file; the
settings here are process-wide overrides and defaults.
"""

from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Precision(str, Enum):
    """Numeric precision of a run."""
    F32 = "f32"
    F64 = "f64"


class LogLevel(str, Enum):
    """Enumeration of supported log levels."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    CONSOLE = "console"
    JSON = "json"


class EngineSettings(BaseSettings):
    """Process-wide engine settings."""

    model_config = SettingsConfigDict(
        env_prefix="ENGINE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        validate_assignment=True,
    )

    precision: Optional[Precision] = Field(
        default=None,
        description="Overrides the precision named in run configs",
    )

    log_level: LogLevel = Field(
        default=LogLevel.INFO,
        description="Minimum level for emitted log events",
    )

    log_format: LogFormat = Field(
        default=LogFormat.CONSOLE,
        description="Console renderer for humans, JSON for log shippers",
    )

    output_dir: Path = Field(
        default=Path("runs"),
        description="Default directory for run artifacts",
    )

    max_parallel: int = Field(
        default=4,
        ge=1,
        description="Upper bound on worker threads for --parallel",
    )

    @field_validator("precision", mode="before")
    @classmethod
    def normalize_precision(cls, v: Optional[str]) -> Optional[str]:
        """Accept 'F64', ' f64 ' and empty strings from the environment."""
        if v is None:
            return None
        v = str(v).strip().lower()
        return v or None


@lru_cache(maxsize=1)
def get_settings() -> EngineSettings:
    return EngineSettings()


def reload_settings() -> EngineSettings:
    """Drop the cached settings and re-read the environment."""
    get_settings.cache_clear()
    return get_settings()
