from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.config import Settings
from dynamics.robot_model import load_model

PROJECT_ROOT = Path(__file__).resolve().parents[1]
ASSETS = PROJECT_ROOT / "assets"
MODELS = ASSETS / "models"
SCENARIOS = ASSETS / "scenarios"


@pytest.fixture(scope="session")
def humanoid():
    """(BodyParams, KinematicTree, ActuatorLimits) of the bundled humanoid."""

    return load_model(MODELS / "humanoid.yaml")


@pytest.fixture(scope="session")
def pendulum():
    return load_model(MODELS / "pendulum.yaml")


@pytest.fixture(scope="session")
def double_pendulum():
    return load_model(MODELS / "double_pendulum.yaml")


@pytest.fixture()
def settings(tmp_path) -> Settings:
    return Settings(
        app_env="test",
        assets_dir=str(ASSETS),
        output_dir=str(tmp_path / "runs"),
        queue_backend="memory",
        metrics_enabled=False,
    )


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(7)
