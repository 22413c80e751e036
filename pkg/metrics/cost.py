"""
Cost Estimates
Analytic FLOPS counts and compressed-sparse-row storage of the weight tensors
"""

from typing import Dict, List, Mapping, Optional

import numpy as np
from pydantic import BaseModel, Field

from config import settings
from nn_core.layers import (
    AdaptiveAvgPool2d, BatchNorm1d, BatchNorm2d, Conv2d, LeakyReLU, Linear, MaxPool2d,
)
from nn_core.model import Model


# ==================== FLOPS ====================

class LayerFlops(BaseModel):
    layer: int
    kind: str
    flops: int


class FlopsEstimate(BaseModel):
    """
    Per-sample FLOPS. Multiply-accumulates count as 2, biases are ignored,
    training is `train_multiplier` times inference.
    """
    inference_flops_per_sample: int = Field(..., ge=0)
    train_flops_per_sample: int = Field(..., ge=0)
    per_layer: List[LayerFlops] = Field(default_factory=list)

    def cumulative_train_flops(self, epochs: int, dataset_size: int) -> int:
        return self.train_flops_per_sample * epochs * dataset_size


def _layer_flops(layer, out_shape) -> int:
    out_elements = int(np.prod(out_shape))
    if isinstance(layer, Linear):
        return 2 * int(np.count_nonzero(layer.masks["weight"]))
    if isinstance(layer, Conv2d):
        # each unmasked kernel entry is applied at every output position
        return 2 * int(np.count_nonzero(layer.masks["weight"])) * int(np.prod(out_shape[1:]))
    if isinstance(layer, (BatchNorm1d, BatchNorm2d, LeakyReLU, MaxPool2d, AdaptiveAvgPool2d)):
        return out_elements
    return 0


def flops_estimate(model: Model, train_multiplier: float = settings.TRAIN_FLOPS_MULTIPLIER) -> FlopsEstimate:
    """
    Estimate inference and training FLOPS for one sample.

    Linear: 2 * in * out; Conv2d: 2 * Cin * K^2 * Cout * Hout * Wout; batch
    norm, activation and pooling: one op per output element. Only unmasked
    weights are counted, so the estimate reflects shrunk shapes for
    structured pruning and unmasked-weight counts for unstructured pruning.
    """
    shapes = model.trace_shapes()
    per_layer = [
        LayerFlops(layer=idx, kind=layer.kind, flops=_layer_flops(layer, shape))
        for idx, (layer, shape) in enumerate(zip(model.layers, shapes))
    ]
    inference = sum(row.flops for row in per_layer)
    return FlopsEstimate(
        inference_flops_per_sample=inference,
        train_flops_per_sample=int(round(inference * train_multiplier)),
        per_layer=[row for row in per_layer if row.flops],
    )


# ==================== Storage ====================

class StorageEstimate(BaseModel):
    dense_bits: int = Field(..., ge=0)
    csr_bits: int = Field(..., gt=0)
    float_bits: int
    index_bits: int

    @property
    def reduction_factor(self) -> float:
        return self.dense_bits / self.csr_bits


def weight_masks(model: Model) -> Dict[str, np.ndarray]:
    return {name: model.mask_for(name) for name in model.prunable_weights()}


def csr_storage_estimate(
    masks: Mapping[str, np.ndarray],
    float_bits: int = settings.FLOAT_BITS,
    index_bits: int = settings.INDEX_BITS,
) -> StorageEstimate:
    """
    Disk size of the weights stored dense versus in CSR form.

    Each tensor is read as a matrix of rows = first axis (conv kernels
    flattened to Cout x Cin*K*K). Dense: N * float_bits. CSR:
    nnz * float_bits + nnz * index_bits + (rows + 1) * index_bits.
    """
    if float_bits < 1 or index_bits < 1:
        raise ValueError("bit widths must be positive")
    dense = 0
    csr = 0
    for mask in masks.values():
        rows = mask.shape[0]
        nnz = int(np.count_nonzero(mask))
        dense += mask.size * float_bits
        csr += nnz * float_bits + nnz * index_bits + (rows + 1) * index_bits
    return StorageEstimate(dense_bits=dense, csr_bits=csr, float_bits=float_bits, index_bits=index_bits)


def reduction(dense_value: float, pruned_value: float) -> Optional[float]:
    """Factor by which a cost dropped relative to the unpruned baseline"""
    return dense_value / pruned_value if pruned_value else None
