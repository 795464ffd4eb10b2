"""
Shared fixtures: seeded generators, tiny mixtures and a tiny experiment config.
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data import generate_gaussian_mixture
from src.harness import ExperimentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mixture():
    """Two well separated classes, 8 features, 200 rows."""
    return generate_gaussian_mixture(num_classes=2, dims=8, per_class=100, separation=6.0, seed=7)


@pytest.fixture
def mixture4():
    return generate_gaussian_mixture(num_classes=4, dims=8, per_class=60, separation=6.0, seed=11)


def tiny_config(mode: str = "urvfl", **overrides) -> ExperimentConfig:
    data = {
        "name": f"tiny_{mode}",
        "mode": mode,
        "seeds": [0],
        "dataset": {"num_classes": 2, "dims": 8, "per_class": 120, "separation": 6.0},
        "partition": {"fractions": [0.5, 0.5]},
        "splits": {"aux_ratio": 0.2, "test_fraction": 0.25},
        "models": {"embedding_dim": 4, "hidden": 16, "learning_rate": 0.01},
        "training": {"epochs": 2, "batch_size": 32},
        "attack": {"pretrain_epochs": 3, "attack_rounds": 12, "train_batch_size": 32,
                   "aux_batch_size": 16, "distance_every": 4, "log_every": 0},
    }
    for path, value in overrides.items():
        section, _, key = path.partition("__")
        if key:
            data.setdefault(section, {})[key] = value
        else:
            data[section] = value
    return ExperimentConfig.from_dict(data).validate()


@pytest.fixture
def make_config():
    return tiny_config
