"""
nn-core
Reverse-mode differentiation engine, layer zoo and architecture builder

Modules:
- tensor: Tensor with closure-based backward
- functional: differentiable layer primitives and the loss
- layers / model: layer zoo and the masked sequential Model
- architectures: MLP5, LeNet5, Conv6 and orthogonal initialisation
- engine: forward, backward, evaluate
- saliency / gradcheck: input saliency maps and finite-difference checks
"""

from nn_core.tensor import GraphError, ShapeError, Tensor
from nn_core.layers import (
    AdaptiveAvgPool2d, BatchNorm1d, BatchNorm2d, Conv2d, Dropout, Flatten,
    Layer, LeakyReLU, Linear, MaxPool2d,
)
from nn_core.model import Model
from nn_core.architectures import build_architecture, init_orthogonal, leaky_relu_gain
from nn_core.engine import Gradients, LossValue, backward, evaluate, forward, predict
from nn_core.saliency import input_saliency
from nn_core.gradcheck import grad_check

__all__ = [
    # Tensors
    'Tensor',
    'ShapeError',
    'GraphError',

    # Layers and models
    'Layer',
    'Linear',
    'Conv2d',
    'BatchNorm1d',
    'BatchNorm2d',
    'LeakyReLU',
    'Dropout',
    'MaxPool2d',
    'AdaptiveAvgPool2d',
    'Flatten',
    'Model',
    'build_architecture',
    'init_orthogonal',
    'leaky_relu_gain',

    # Evaluation
    'LossValue',
    'Gradients',
    'forward',
    'backward',
    'evaluate',
    'predict',
    'input_saliency',
    'grad_check',
]
