"""Process-level settings read from the environment."""

import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv(dotenv_path=".env.local")


class Settings(BaseModel):
    """Environment-derived settings."""

    data_dir: Path = Path("./data")
    log_level: str = "INFO"
    sentry_dsn: Optional[str] = None
    sentry_environment: str = "development"
    enable_metrics: bool = False
    workers: int = Field(default=1, ge=1)


def _truthy(value: Optional[str]) -> bool:
    return (value or "").strip().lower() in ("1", "true", "yes", "on")


@lru_cache
def get_settings() -> Settings:
    """Get Settings singleton."""
    return Settings(
        data_dir=Path(os.environ.get("DATA_DIR", "./data")),
        log_level=os.environ.get("LOG_LEVEL", "INFO").upper(),
        sentry_dsn=os.environ.get("SENTRY_DSN") or None,
        sentry_environment=os.environ.get("SENTRY_ENVIRONMENT", "development"),
        enable_metrics=_truthy(os.environ.get("ENABLE_METRICS")),
        workers=int(os.environ.get("SCLC_WORKERS", "1")),
    )
