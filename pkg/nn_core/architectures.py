"""
Architecture Builder
MLP5, LeNet5 and Conv6 layer listings with uniform width scaling
"""

import logging
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from config import settings
from nn_core.layers import (
    AdaptiveAvgPool2d, BatchNorm1d, BatchNorm2d, Conv2d, Dropout, Flatten,
    Layer, LeakyReLU, Linear, MaxPool2d,
)
from nn_core.model import Model

logger = logging.getLogger(__name__)

InputDims = Union[int, Sequence[int]]


def _width(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _activation_block(layers: List[Layer], batch_norm: Layer) -> None:
    layers.append(batch_norm)
    layers.append(LeakyReLU(settings.LEAKY_SLOPE))


# ==================== Listings ====================

def _mlp5(input_shape: Tuple[int, ...], num_classes: int, scale: float) -> List[Layer]:
    hidden = _width(512, scale)
    layers: List[Layer] = []
    if len(input_shape) > 1:
        layers.append(Flatten())
    in_features = int(np.prod(input_shape))
    for _ in range(4):
        layers.append(Linear(in_features, hidden))
        _activation_block(layers, BatchNorm1d(hidden))
        layers.append(Dropout(settings.DROPOUT))
        in_features = hidden
    layers.append(Linear(hidden, num_classes))
    return layers


def _lenet5(input_shape: Tuple[int, ...], num_classes: int, scale: float) -> List[Layer]:
    c1, c2, c3, fc = _width(6, scale), _width(16, scale), _width(120, scale), _width(84, scale)
    layers: List[Layer] = [Conv2d(input_shape[0], c1, 5, padding=2)]
    _activation_block(layers, BatchNorm2d(c1))
    layers.append(MaxPool2d(2, 2))
    layers.append(Conv2d(c1, c2, 5))
    _activation_block(layers, BatchNorm2d(c2))
    layers.append(MaxPool2d(2, 2))
    layers.append(Conv2d(c2, c3, 5))
    _activation_block(layers, BatchNorm2d(c3))
    layers += [AdaptiveAvgPool2d((3, 3)), Dropout(settings.DROPOUT), Flatten(), Linear(c3 * 9, fc)]
    _activation_block(layers, BatchNorm1d(fc))
    layers += [Dropout(settings.DROPOUT), Linear(fc, num_classes)]
    return layers


def _conv6(input_shape: Tuple[int, ...], num_classes: int, scale: float) -> List[Layer]:
    widths = [_width(64, scale), _width(128, scale), _width(256, scale)]
    fc = _width(256, scale)
    layers: List[Layer] = []
    in_channels = input_shape[0]
    for block, channels in enumerate(widths):
        for _ in range(2):
            layers.append(Conv2d(in_channels, channels, 3, padding=1))
            _activation_block(layers, BatchNorm2d(channels))
            in_channels = channels
        if block < len(widths) - 1:
            layers.append(MaxPool2d(2, 2))
    layers += [AdaptiveAvgPool2d((3, 3)), Dropout(settings.DROPOUT), Flatten(), Linear(in_channels * 9, fc)]
    _activation_block(layers, BatchNorm1d(fc))
    layers += [Dropout(settings.DROPOUT), Linear(fc, fc)]
    _activation_block(layers, BatchNorm1d(fc))
    layers += [Dropout(settings.DROPOUT), Linear(fc, num_classes)]
    return layers


ARCHITECTURES: Dict[str, Callable[[Tuple[int, ...], int, float], List[Layer]]] = {
    "MLP5": _mlp5,
    "LeNet5": _lenet5,
    "Conv6": _conv6,
}

IMAGE_ARCHITECTURES = {"LeNet5", "Conv6"}


def build_architecture(name: str, input_dims: InputDims, num_classes: int, width_scale: float = 1.0) -> Model:
    """
    Build one of the supported architectures with all masks set to ones.

    Args:
        name: MLP5, LeNet5 or Conv6
        input_dims: Input extent I, an int or a (C, H, W) tuple
        num_classes: Number of classes K
        width_scale: Factor in (0, 1] applied to every hidden width

    Returns:
        Freshly built Model (weights zero until initialised)
    """
    if name not in ARCHITECTURES:
        raise ValueError(f"Unknown architecture '{name}'. Choose from {sorted(ARCHITECTURES)}")
    input_shape = (input_dims,) if isinstance(input_dims, int) else tuple(input_dims)
    if not input_shape or any(int(d) < 1 for d in input_shape) or num_classes < 1:
        raise ValueError(f"dimensions must be positive: input {input_shape}, classes {num_classes}")
    if not 0.0 < width_scale <= 1.0:
        raise ValueError(f"width_scale must lie in (0, 1], got {width_scale}")
    if name in IMAGE_ARCHITECTURES and len(input_shape) != 3:
        raise ValueError(f"{name} expects (C, H, W) input dims, got {input_shape}")

    layers = ARCHITECTURES[name](input_shape, num_classes, width_scale)
    model = Model(layers, input_shape, num_classes, name=name, width_scale=width_scale)
    model.reseed(0)
    logger.debug(f"Built {name}: {model.parameter_count()} parameters")
    return model


# ==================== Initialisation ====================

def leaky_relu_gain(slope: float = settings.LEAKY_SLOPE) -> float:
    return float(np.sqrt(2.0 / (1.0 + slope ** 2)))


def orthogonal(shape: Tuple[int, ...], gain: float, rng: np.random.Generator) -> np.ndarray:
    """
    Orthogonal matrix of `shape` (flattened to rows x rest), scaled by `gain`.

    Rows are orthonormal when rows <= cols, columns otherwise.
    """
    rows = shape[0]
    cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    flat = rng.standard_normal((rows, cols))
    if rows < cols:
        flat = flat.T
    q, r = np.linalg.qr(flat)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q.reshape(shape)


def init_orthogonal(model: Model, seed: int) -> Model:
    """
    Orthogonal initialisation scaled by the LeakyReLU gain; biases zeroed.

    Batch-norm scale/shift are reset to 1/0. Deterministic under `seed`.
    """
    rng = np.random.default_rng(seed)
    gain = leaky_relu_gain()
    for layer in model.layers:
        if not layer.has_gate:
            continue
        weight = layer.params["weight"]
        weight.data = orthogonal(weight.shape, gain, rng)
        if "bias" in layer.params:
            layer.params["bias"].data = np.zeros(layer.params["bias"].shape)
    for layer in model.layers:
        if isinstance(layer, (BatchNorm1d, BatchNorm2d)):
            layer.params["weight"].data = np.ones(layer.num_features)
            layer.params["bias"].data = np.zeros(layer.num_features)
    model.apply_masks()
    return model
