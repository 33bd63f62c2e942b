"""
Test configuration and fixtures.
"""
import os
import sys

import pytest
from fastapi.testclient import TestClient

# Add the project root to PYTHONPATH
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.core.config import AnalysisConfig, Settings

# Settings for tests
test_settings = Settings(
    ENVIRONMENT="testing",
    SENTRY_DSN=None,
    LOG_LEVEL="WARNING",
    LOG_FORMAT="console",
    LOG_FILE=None,
)

# Override the global settings
import app.core.config as config_module
config_module.settings = test_settings

from app.services.problems import load_problem


@pytest.fixture
def cfg() -> AnalysisConfig:
    """Reduced sample counts for fast unit tests."""
    return AnalysisConfig(samples_per_radius=40, restarts=8, refine_rounds=2)


@pytest.fixture
def full_cfg() -> AnalysisConfig:
    """Default knobs, as used by the reproduction checks."""
    return AnalysisConfig()


@pytest.fixture(scope="session")
def bundled():
    """Loader for bundled problems, cached per session."""
    cache = {}

    def load(name):
        if name not in cache:
            cache[name] = load_problem(name)
        return cache[name]

    return load


@pytest.fixture
def client() -> TestClient:
    from app.main import create_application

    return TestClient(create_application())
