import json

import numpy as np
import pytest

from src.experiment_loader import ExperimentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_config(tmp_path):
    """Factory for small, valid experiment configs writing under tmp_path"""
    def factory(**overrides) -> ExperimentConfig:
        data = {
            "experiment_id": "unit",
            "ensemble": {"kind": "AbsNormal", "n": 12, "N": 30},
            "densities": [1.0, 0.5],
            "algorithms": ["omp", "cosamp"],
            "k_min": 1,
            "k_max": 3,
            "trials": 3,
            "seed": 99,
            "output": str(tmp_path / "out"),
        }
        data.update(overrides)
        return ExperimentConfig.model_validate(data)
    return factory


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a JSON file and return its path"""
    def writer(data: dict, name: str = "experiment.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path
    return writer
