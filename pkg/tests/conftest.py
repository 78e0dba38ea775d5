from __future__ import annotations

import numpy as np
import pytest

from tabattr import nn, synth
from tabattr.rng import child_seed


@pytest.fixture(scope="session")
def tiny_linear_data():
    """Small linear-regime dataset for fast unit tests (n=600)."""
    return synth.gen_linear(7, n=600)


@pytest.fixture(scope="session")
def tiny_trained_model(tiny_linear_data):
    """A small MLP trained briefly on the tiny dataset; enough structure
    for gradient and attribution tests without benchmark-scale cost."""
    train_ds, _, _ = tiny_linear_data
    model = nn.init_mlp(20, 3, child_seed(7, "tiny"), hidden_dims=(32, 16))
    cfg = nn.TrainConfig(epochs=30, batch_size=128, seed=child_seed(7, "tiny"))
    return nn.train(model, train_ds.X, train_ds.y, cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
