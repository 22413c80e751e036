"""
Adam
Mask-respecting Adam with coupled L2 weight decay and global-norm clipping
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from config import settings
from nn_core.model import Model
from nn_core.tensor import GraphError

logger = logging.getLogger(__name__)


class ArchitectureMismatchError(ValueError):
    """Raised when state recorded for one architecture is applied to another"""


@dataclass
class OptimState:
    """
    Adam moments and hyperparameters bound to one model.

    Moments are keyed like Model.named_parameters and created on first use.
    """

    lr: float = settings.LEARNING_RATE
    beta1: float = settings.BETA1
    beta2: float = settings.BETA2
    eps: float = settings.ADAM_EPS
    weight_decay: float = settings.WEIGHT_DECAY
    clip_magnitude: float = settings.CLIP_MAGNITUDE
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def moments(self, name: str, shape) -> tuple:
        if name not in self.first_moment:
            self.first_moment[name] = np.zeros(shape)
            self.second_moment[name] = np.zeros(shape)
        elif self.first_moment[name].shape != tuple(shape):
            raise ArchitectureMismatchError(
                f"moment for {name} has shape {self.first_moment[name].shape}, parameter has {tuple(shape)}"
            )
        return self.first_moment[name], self.second_moment[name]

    def reset(self) -> None:
        """Forget all moments and restart bias correction"""
        self.first_moment.clear()
        self.second_moment.clear()
        self.step = 0


def _masked_grads(model: Model) -> Dict[str, np.ndarray]:
    grads = {}
    for name, param in model.named_parameters():
        if param.grad is None:
            raise GraphError(f"no gradient for {name}; run backward before stepping")
        mask = model.mask_for(name)
        if mask is not None:
            param.grad = param.grad * mask
        grads[name] = param.grad
    return grads


def global_norm(model: Model) -> float:
    total = 0.0
    for _, param in model.named_parameters():
        if param.grad is not None:
            total += float(np.sum(param.grad ** 2))
    return float(np.sqrt(total))


def clip_gradients(model: Model, magnitude: float = settings.CLIP_MAGNITUDE) -> float:
    """
    Scale all gradients by magnitude / norm when their global L2 norm exceeds `magnitude`.

    Returns:
        The global norm before clipping
    """
    norm = global_norm(model)
    if norm > magnitude:
        scale = magnitude / norm
        for _, param in model.named_parameters():
            if param.grad is not None:
                param.grad = param.grad * scale
    return norm


def adam_step(model: Model, state: OptimState) -> OptimState:
    """
    One Adam update over every parameter of `model`.

    Masked gradient entries are zeroed before clipping; after the update the
    masked parameter entries and their moments are reset to exactly zero.

    Raises:
        GraphError: A parameter has no gradient
    """
    _masked_grads(model)
    clip_gradients(model, state.clip_magnitude)

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for name, param in model.named_parameters():
        grad = param.grad + state.weight_decay * param.data
        m, v = state.moments(name, param.shape)
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad ** 2
        param.data = param.data - state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)

        mask = model.mask_for(name)
        if mask is not None:
            param.data *= mask
            m *= mask
            v *= mask
    return state
