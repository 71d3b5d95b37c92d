"""Configuration file for pytest."""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same random inputs."""
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch):
    """Isolate tests from the caller's environment."""
    from src.config import get_settings

    for name in ("DATA_DIR", "ENABLE_METRICS", "SCLC_WORKERS", "SENTRY_DSN"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
