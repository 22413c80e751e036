"""
Shared pytest fixtures: tiny models and synthetic datasets
"""

import numpy as np
import pytest

from data.datasets import synthetic_blobs
from nn_core.architectures import init_orthogonal
from nn_core.layers import BatchNorm1d, BatchNorm2d, Conv2d, Flatten, LeakyReLU, Linear, MaxPool2d
from nn_core.model import Model


def make_mlp(seed: int = 0, dims: int = 8, hidden=(6, 5), classes: int = 3) -> Model:
    layers = []
    width = dims
    for h in hidden:
        layers += [Linear(width, h), BatchNorm1d(h), LeakyReLU()]
        width = h
    layers.append(Linear(width, classes))
    model = Model(layers, (dims,), classes, name="tiny-mlp")
    return init_orthogonal(model, seed)


def make_convnet(seed: int = 0, classes: int = 3) -> Model:
    """(1, 8, 8) input: conv -> pool -> conv -> flatten -> linear -> linear"""
    layers = [
        Conv2d(1, 3, 3, padding=1), BatchNorm2d(3), LeakyReLU(), MaxPool2d(2, 2),
        Conv2d(3, 4, 3), BatchNorm2d(4), LeakyReLU(),
        Flatten(), Linear(4 * 2 * 2, 5), BatchNorm1d(5), LeakyReLU(),
        Linear(5, classes),
    ]
    model = Model(layers, (1, 8, 8), classes, name="tiny-conv")
    return init_orthogonal(model, seed)


def randomise_batch_norm(model: Model, seed: int) -> Model:
    """Non-trivial running statistics and affine parameters"""
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        if isinstance(layer, (BatchNorm1d, BatchNorm2d)):
            n = layer.num_features
            layer.running_mean[...] = rng.normal(0.0, 0.5, n)
            layer.running_var[...] = rng.uniform(0.5, 2.0, n)
            layer.params["weight"].data = rng.uniform(0.5, 1.5, n)
            layer.params["bias"].data = rng.normal(0.0, 0.2, n)
    return model


@pytest.fixture
def mlp():
    return make_mlp()


@pytest.fixture
def convnet():
    return make_convnet()


@pytest.fixture
def blobs():
    return synthetic_blobs(n_classes=3, n_per_class=40, dims=8, seed=0)


@pytest.fixture
def image_blobs():
    return synthetic_blobs(n_classes=3, n_per_class=20, dims=(1, 8, 8), seed=0)


@pytest.fixture
def batch(blobs):
    return blobs.images[:32], blobs.labels[:32]
