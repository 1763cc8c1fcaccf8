from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

Environment = Literal["development", "production", "staging", "test"]

_ENV_FILE_SUFFIXES = {
    "prod": "prod",
    "production": "prod",
    "dev": "dev",
    "development": "dev",
    "test": "test",
    "testing": "test",
}


def _resolve_env_files() -> tuple[str, ...]:
    suffix = _ENV_FILE_SUFFIXES.get(os.getenv("UPLIFT_ENVIRONMENT", "development").lower())
    return (".env", f".env.{suffix}") if suffix else (".env",)


class Settings(BaseSettings):
    """Process-wide defaults; a run configuration or CLI flag overrides seed and n_jobs."""

    model_config = SettingsConfigDict(
        env_prefix="UPLIFT_",
        env_file=_resolve_env_files(),
        env_nested_delimiter="__",
        extra="ignore",
    )

    environment: Environment = "development"
    project_name: str = "Revenue Uplift Toolkit"
    log_level: str = "INFO"
    log_json: bool = False
    output_dir: str = Field(default="reports", description="Run output directory when none is configured.")
    n_jobs: int = Field(default=1, ge=1, description="Parallel candidate fits and tree growing.")
    seed: int = Field(default=0, ge=0)

    @field_validator("log_level")
    @classmethod
    def _upper_level(cls, value: str) -> str:
        return value.upper()

    @property
    def reports_path(self) -> Path:
        return Path(self.output_dir)


@lru_cache
def get_settings() -> Settings:
    return Settings()
