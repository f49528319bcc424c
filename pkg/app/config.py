"""Application configuration handled with Pydantic models."""
from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

from dotenv import dotenv_values
from pydantic import AliasChoices, BaseModel, ConfigDict, Field

ENV_PREFIX = "LOCOMANIP_"


def _collect_env(prefix: str = ENV_PREFIX) -> dict[str, Any]:
    """Load .env + OS variables and normalise keys."""

    raw: dict[str, Any] = {}
    env_sources: list[dict[str, Any]] = []
    env_files = [".env.example", ".env", ".env.local"]
    override_env_file = os.environ.get(f"{prefix}ENV_FILE")
    if override_env_file and override_env_file not in env_files:
        env_files.append(override_env_file)
    for env_file in env_files:
        env_sources.append(dotenv_values(env_file))
    env_sources.append(os.environ)
    for source in env_sources:
        for key, value in source.items():
            if value in (None, ""):
                continue
            key_upper = key.upper()
            if key_upper.startswith(prefix):
                stripped = key_upper[len(prefix) :]
            else:
                stripped = key_upper
            raw[stripped] = value
            raw[stripped.lower()] = value
    return raw


class Settings(BaseModel):
    """Central configuration for the controller stack and its runner."""

    model_config = ConfigDict(extra="ignore", populate_by_name=True, validate_assignment=False)

    app_name: str = Field(default="locomanip")
    app_env: Literal["development", "staging", "production", "test"] = Field(
        default="development",
        validation_alias=AliasChoices("APP_ENV", "ENVIRONMENT"),
    )
    log_level: str = Field(
        default="INFO",
        validation_alias=AliasChoices("LOG_LEVEL"),
    )
    log_format: Literal["json", "console"] = Field(default="console")

    assets_dir: str = Field(default="assets")
    output_dir: str = Field(default="runs")

    queue_backend: Literal["auto", "redis", "memory"] = Field(default="auto")
    redis_url: str = Field(default="redis://localhost:6379/0")
    rq_default_queue: str = Field(default="sweeps")
    rq_job_timeout: int = Field(default=3600, ge=1)
    sweep_workers: int = Field(default=2, ge=1)

    metrics_enabled: bool = Field(default=True)
    prometheus_namespace: str = Field(default="locomanip")

    qp_tol: float = Field(default=1e-8, gt=0.0)
    qp_max_iter: int = Field(default=500, ge=1)
    plant_dt: float = Field(default=5e-4, gt=0.0, le=1e-3)
    wbc_rate_hz: float = Field(default=1000.0, gt=0.0)
    pitch_guard: float = Field(default=0.087, gt=0.0, lt=1.5)
    attach_threshold: float = Field(default=0.05, gt=0.0)

    @property
    def models_dir(self) -> Path:
        return Path(self.assets_dir) / "models"

    @property
    def scenarios_dir(self) -> Path:
        return Path(self.assets_dir) / "scenarios"

    @classmethod
    def load(cls) -> "Settings":
        data = _collect_env()
        instance = cls.model_validate(data)
        _validate_required_settings(instance)
        return instance


@lru_cache()
def get_settings() -> Settings:
    """Return a cached ``Settings`` instance."""

    return Settings.load()


def _validate_required_settings(settings: Settings) -> None:
    """Fail fast when settings contradict each other."""

    problems: dict[str, str] = {}
    if settings.plant_dt > 1.0 / settings.wbc_rate_hz + 1e-12:
        problems["LOCOMANIP_PLANT_DT"] = "the plant must step at least as fast as the WBC tick."
    if settings.queue_backend == "redis" and not settings.redis_url.strip():
        problems["LOCOMANIP_REDIS_URL"] = "a Redis URL is required when queue_backend=redis."
    if problems:
        details = "; ".join(f"{key}: {reason}" for key, reason in problems.items())
        raise ValueError(f"Invalid configuration: {details}")
