"""
Forward/Backward Engine
Loss evaluation, reverse pass and batched evaluation for a Model
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from nn_core import functional as F
from nn_core.model import Model
from nn_core.tensor import GraphError, ShapeError, Tensor

logger = logging.getLogger(__name__)


@dataclass
class LossValue:
    """Mean cross-entropy of one forward pass, keeping its graph for backward"""

    scalar: float
    per_sample: Optional[np.ndarray] = None
    tensor: Optional[Tensor] = field(default=None, repr=False)
    inputs: Optional[Tensor] = field(default=None, repr=False)


@dataclass
class Gradients:
    params: Dict[str, np.ndarray]
    gates: Dict[int, np.ndarray]
    inputs: Optional[np.ndarray] = None


def forward(model: Model, inputs, targets, input_grad: bool = False) -> Tuple[LossValue, Tensor]:
    """
    Run the model on a batch and compute the mean softmax cross-entropy.

    Args:
        model: Model in its current train/eval mode
        inputs: Batch array or Tensor shaped (N, *model.input_shape)
        targets: Integer class labels, length N
        input_grad: Track the gradient with respect to the inputs

    Returns:
        (LossValue, logits)
    """
    data = inputs.data if isinstance(inputs, Tensor) else np.asarray(inputs, dtype=np.float64)
    if data.ndim == 0 or data.shape[0] == 0:
        raise ShapeError("empty batch")
    x = Tensor(data, requires_grad=input_grad, name="inputs")
    logits = model.logits(x)
    loss, per_sample = F.cross_entropy(logits, targets)
    value = LossValue(scalar=float(loss.data), per_sample=per_sample, tensor=loss, inputs=x)
    model._last_loss = value
    return value, logits


def backward(model: Model, loss: Optional[LossValue] = None) -> Gradients:
    """
    Populate gradients of the loss for every parameter, gate and (if tracked) the input.

    Gates are never updated; their gradients are read by the node criterion.
    """
    loss = loss if loss is not None else getattr(model, "_last_loss", None)
    if loss is None or loss.tensor is None:
        raise GraphError("backward called before forward")
    model.zero_grad()
    loss.tensor.backward()

    params = {}
    for name, param in model.named_parameters():
        params[name] = param.grad if param.grad is not None else np.zeros_like(param.data)
        param.grad = params[name]
    gates = {}
    for idx, gate in model.gates().items():
        gates[idx] = gate.grad if gate.grad is not None else np.zeros_like(gate.data)
        gate.grad = gates[idx]
    input_grad = loss.inputs.grad if loss.inputs is not None and loss.inputs.requires_grad else None
    return Gradients(params=params, gates=gates, inputs=input_grad)


def predict(model: Model, inputs: np.ndarray) -> np.ndarray:
    return model.logits(Tensor(inputs)).data


def evaluate(model: Model, images: np.ndarray, labels: np.ndarray, batch_size: int = 512) -> Tuple[float, float]:
    """
    Eval-mode loss and accuracy over a full array of samples.

    Returns:
        (mean loss, accuracy in [0, 1])
    """
    if len(labels) == 0:
        raise ShapeError("cannot evaluate on an empty dataset")
    previous = model.mode
    model.eval()
    total_loss = 0.0
    correct = 0
    for start in range(0, len(labels), batch_size):
        batch_x = images[start:start + batch_size]
        batch_y = labels[start:start + batch_size]
        logits = predict(model, batch_x)
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        total_loss += float((log_norm - shifted[np.arange(len(batch_y)), batch_y]).sum())
        correct += int((logits.argmax(axis=1) == batch_y).sum())
    model.set_mode(previous)
    return total_loss / len(labels), correct / len(labels)
