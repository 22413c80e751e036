"""
Layer Zoo
Parameterised and stateless layers used by the MLP5, LeNet5 and Conv6 listings
"""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config import settings
from nn_core import functional as F
from nn_core.tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)


class Layer:
    """
    Base layer.

    Attributes:
        kind: Layer kind name (matches the class name)
        params: Named trainable tensors
        masks: Binary masks for the prunable parameters, same shapes as params
        gate: Per-output-node scalars fixed at 1 (gate-bearing layers only)
        training: Train/eval mode flag
    """

    kind = "Layer"

    def __init__(self):
        self.params: Dict[str, Tensor] = {}
        self.masks: Dict[str, np.ndarray] = {}
        self.gate: Optional[Tensor] = None
        self.training = True

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def hyperparams(self) -> Dict[str, Any]:
        return {}

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}

    @property
    def has_gate(self) -> bool:
        return self.gate is not None

    @property
    def num_nodes(self) -> int:
        return 0 if self.gate is None else self.gate.size

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.hyperparams().items())
        return f"{self.kind}({args})"


# ==================== Gate-bearing layers ====================

class Linear(Layer):
    """Fully connected layer; the gate multiplies each output pre-activation"""

    kind = "Linear"

    def __init__(self, in_features: int, out_features: int, bias: bool = True):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ValueError(f"Linear dims must be positive, got {in_features}->{out_features}")
        self.in_features = in_features
        self.out_features = out_features
        self.params["weight"] = Tensor(np.zeros((out_features, in_features)), requires_grad=True, name="weight")
        self.masks["weight"] = np.ones((out_features, in_features))
        if bias:
            self.params["bias"] = Tensor(np.zeros(out_features), requires_grad=True, name="bias")
            self.masks["bias"] = np.ones(out_features)
        self.gate = Tensor(np.ones(out_features), requires_grad=True, name="gate")

    def hyperparams(self) -> Dict[str, Any]:
        return {"in_features": self.in_features, "out_features": self.out_features,
                "bias": "bias" in self.params}

    def forward(self, x: Tensor) -> Tensor:
        weight = F.masked(self.params["weight"], self.masks["weight"])
        bias = F.masked(self.params["bias"], self.masks["bias"]) if "bias" in self.params else None
        return F.linear(x, weight, bias) * self.gate


class Conv2d(Layer):
    """2-D convolution; a single gate scales each output-channel map"""

    kind = "Conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0, bias: bool = True):
        super().__init__()
        if in_channels < 1 or out_channels < 1 or kernel_size < 1:
            raise ValueError(f"Conv2d dims must be positive, got {in_channels}->{out_channels} k={kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.params["weight"] = Tensor(np.zeros(shape), requires_grad=True, name="weight")
        self.masks["weight"] = np.ones(shape)
        if bias:
            self.params["bias"] = Tensor(np.zeros(out_channels), requires_grad=True, name="bias")
            self.masks["bias"] = np.ones(out_channels)
        self.gate = Tensor(np.ones(out_channels), requires_grad=True, name="gate")

    def hyperparams(self) -> Dict[str, Any]:
        return {"in_channels": self.in_channels, "out_channels": self.out_channels,
                "kernel_size": self.kernel_size, "stride": self.stride,
                "padding": self.padding, "bias": "bias" in self.params}

    def forward(self, x: Tensor) -> Tensor:
        weight = F.masked(self.params["weight"], self.masks["weight"])
        bias = F.masked(self.params["bias"], self.masks["bias"]) if "bias" in self.params else None
        pre = F.conv2d(x, weight, bias, stride=self.stride, padding=self.padding)
        return pre * self.gate.reshape(1, -1, 1, 1)


# ==================== Normalisation ====================

class _BatchNorm(Layer):

    expected_ndim = 0

    def __init__(self, num_features: int, eps: float = settings.BN_EPS, momentum: float = settings.BN_MOMENTUM):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.params["weight"] = Tensor(np.ones(num_features), requires_grad=True, name="weight")
        self.params["bias"] = Tensor(np.zeros(num_features), requires_grad=True, name="bias")
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)

    def hyperparams(self) -> Dict[str, Any]:
        return {"num_features": self.num_features, "eps": self.eps, "momentum": self.momentum}

    def buffers(self) -> Dict[str, np.ndarray]:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != self.expected_ndim or x.shape[1] != self.num_features:
            raise ShapeError(f"{self.kind}({self.num_features}) got input {x.shape}")
        return F.batch_norm(x, self.params["weight"], self.params["bias"],
                            self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class BatchNorm1d(_BatchNorm):
    kind = "BatchNorm1d"
    expected_ndim = 2


class BatchNorm2d(_BatchNorm):
    kind = "BatchNorm2d"
    expected_ndim = 4


# ==================== Stateless layers ====================

class LeakyReLU(Layer):
    kind = "LeakyReLU"

    def __init__(self, negative_slope: float = settings.LEAKY_SLOPE):
        super().__init__()
        self.negative_slope = negative_slope

    def hyperparams(self) -> Dict[str, Any]:
        return {"negative_slope": self.negative_slope}

    def forward(self, x: Tensor) -> Tensor:
        return F.leaky_relu(x, self.negative_slope)


class Dropout(Layer):
    kind = "Dropout"

    def __init__(self, p: float = settings.DROPOUT, seed: int = 0):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
        self.p = p
        self.rng = np.random.default_rng(seed)

    def hyperparams(self) -> Dict[str, Any]:
        return {"p": self.p}

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.p, self.training, self.rng)


class MaxPool2d(Layer):
    kind = "MaxPool2d"

    def __init__(self, kernel_size: int = 2, stride: Optional[int] = None):
        super().__init__()
        self.kernel_size = kernel_size
        self.stride = stride or kernel_size

    def hyperparams(self) -> Dict[str, Any]:
        return {"kernel_size": self.kernel_size, "stride": self.stride}

    def forward(self, x: Tensor) -> Tensor:
        return F.max_pool2d(x, self.kernel_size, self.stride)


class AdaptiveAvgPool2d(Layer):
    kind = "AdaptiveAvgPool2d"

    def __init__(self, output_size: Tuple[int, int] = (3, 3)):
        super().__init__()
        self.output_size = tuple(output_size)

    def hyperparams(self) -> Dict[str, Any]:
        return {"output_size": list(self.output_size)}

    def forward(self, x: Tensor) -> Tensor:
        return F.adaptive_avg_pool2d(x, self.output_size)


class Flatten(Layer):
    kind = "Flatten"

    def forward(self, x: Tensor) -> Tensor:
        return F.flatten(x)


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Linear, Conv2d, BatchNorm1d, BatchNorm2d, LeakyReLU, Dropout,
                MaxPool2d, AdaptiveAvgPool2d, Flatten)
}


def layer_from_config(kind: str, hyperparams: Dict[str, Any]) -> Layer:
    """Rebuild a layer from its kind and hyperparameters"""
    if kind not in LAYER_KINDS:
        raise ValueError(f"Unknown layer kind: {kind}")
    return LAYER_KINDS[kind](**hyperparams)
