"""
Sparsity Accounting
Weight, node and per-layer sparsity of a (possibly shrunk) model
"""

from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from nn_core.model import Model


class SparsityReport(BaseModel):
    """Fractions of masked weights and pruned nodes, plus per-layer remaining-weight fractions"""
    weight_sparsity: float = Field(..., ge=0.0, le=1.0)
    node_sparsity: float = Field(..., ge=0.0, le=1.0)
    layer_names: List[str] = Field(default_factory=list)
    layer_sizes: List[int] = Field(default_factory=list)
    per_layer: List[float] = Field(default_factory=list, description="Remaining fraction per prunable weight tensor")

    def survival_table(self) -> pd.DataFrame:
        return pd.DataFrame({
            "layer": self.layer_names,
            "size": self.layer_sizes,
            "remaining": [int(round(f * s)) for f, s in zip(self.per_layer, self.layer_sizes)],
            "fraction": self.per_layer,
        })


def _hidden_nodes(model: Model) -> List[int]:
    return [int(np.count_nonzero(model.node_masks[idx])) for idx in model.hidden_gate_layers()]


def sparsity(model: Model, reference: Optional[Model] = None) -> SparsityReport:
    """
    Sparsity of `model` over its prunable weight tensors and hidden nodes.

    Args:
        model: Masked or shrunk model
        reference: Unpruned model of the same architecture; required to
            account for nodes and weights that shrinking removed

    Returns:
        SparsityReport; per-layer fractions are relative to the reference
        layer sizes, so sum(fraction * size) equals the unmasked weight count
    """
    reference = reference or model
    names = reference.prunable_weights()
    if len(names) != len(model.prunable_weights()):
        raise ValueError("model and reference have different numbers of prunable layers")

    sizes = [reference.mask_for(name).size for name in names]
    remaining = [int(np.count_nonzero(model.mask_for(name))) for name in model.prunable_weights()]
    total = sum(sizes)
    weight_sparsity = 1.0 - sum(remaining) / total if total else 0.0

    ref_nodes = [reference.layers[idx].num_nodes for idx in reference.hidden_gate_layers()]
    node_total = sum(ref_nodes)
    node_sparsity = 1.0 - sum(_hidden_nodes(model)) / node_total if node_total else 0.0

    return SparsityReport(
        weight_sparsity=float(np.clip(weight_sparsity, 0.0, 1.0)),
        node_sparsity=float(np.clip(node_sparsity, 0.0, 1.0)),
        layer_names=names,
        layer_sizes=sizes,
        per_layer=[r / s for r, s in zip(remaining, sizes)],
    )
