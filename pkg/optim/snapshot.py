"""
Weight Snapshots
Copy and rewind parameter values for iterative magnitude pruning
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from nn_core.model import Model
from optim.adam import ArchitectureMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightSnapshot:
    """Parameter values (and batch-norm statistics) captured at one epoch; masks are not stored"""

    epoch: int
    signature: Tuple
    params: Dict[str, np.ndarray] = field(repr=False)
    buffers: Dict[Tuple[int, str], np.ndarray] = field(repr=False)


def snapshot_weights(model: Model, epoch: int) -> WeightSnapshot:
    params = {name: param.data.copy() for name, param in model.named_parameters()}
    buffers = {
        (idx, name): buf.copy()
        for idx, layer in enumerate(model.layers)
        for name, buf in layer.buffers().items()
    }
    logger.debug(f"Snapshot of {len(params)} tensors at epoch {epoch}")
    return WeightSnapshot(epoch=epoch, signature=model.signature(), params=params, buffers=buffers)


def restore_weights(model: Model, snapshot: WeightSnapshot) -> Model:
    """
    Overwrite parameter values from `snapshot`, keeping the model's current masks.

    Raises:
        ArchitectureMismatchError: The snapshot was taken from a different architecture
    """
    if model.signature() != snapshot.signature:
        raise ArchitectureMismatchError("snapshot was taken from a model with different parameter shapes")
    for name, param in model.named_parameters():
        param.data = snapshot.params[name].copy()
    for (idx, name), saved in snapshot.buffers.items():
        np.copyto(model.layers[idx].buffers()[name], saved)
    model.apply_masks()
    logger.debug(f"Rewound weights to epoch {snapshot.epoch}")
    return model
