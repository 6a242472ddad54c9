"""Shared fixtures for the PU-ACLMS test suite."""

import numpy as np
import pytest

from puaclms.core.config import get_settings
from puaclms.models.signal import RngStream
from puaclms.schemas.experiment import ExperimentConfig


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Each test sees settings built from its own environment."""
    monkeypatch.setenv("PUACLMS_OUTPUT_DIR", str(tmp_path / "results"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def stream():
    return RngStream(12345)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def small_config():
    """N=4, M=2 sequential config with the default non-circular AR(1) input."""
    return ExperimentConfig(n=4, m=2, mode="sequential", mu=0.02, trials=20, horizon=400, seed=3)


@pytest.fixture
def write_cfg(tmp_path):
    """Write a key=value config file and return its path."""

    def _write(name="exp.cfg", **values):
        path = tmp_path / name
        path.write_text("".join(f"{key}={value}\n" for key, value in values.items()), encoding="utf-8")
        return path

    return _write
