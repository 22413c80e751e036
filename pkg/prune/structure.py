"""
Node Structure
Mapping between nodes and the weights they own, node masking and physical shrinking
"""

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from nn_core.layers import BatchNorm1d, BatchNorm2d, Conv2d, Flatten, Layer, Linear
from nn_core.model import Model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NodeLink:
    """
    Weights owned by the nodes of one gate-bearing layer.

    Node n owns row n of `incoming` (and entry n of `bias`) and the columns
    n*block .. (n+1)*block - 1 of `outgoing`. `block` is the spatial footprint
    of a channel when a Flatten sits between the two layers, otherwise 1.
    """

    layer: int
    incoming: str
    bias: Optional[str]
    outgoing: Optional[str]
    block: int = 1


def node_links(model: Model) -> Dict[int, NodeLink]:
    gate_layers = model.gate_layers()
    shapes = model.trace_shapes()
    links = {}
    for pos, idx in enumerate(gate_layers):
        outgoing, block = None, 1
        if pos + 1 < len(gate_layers):
            nxt = gate_layers[pos + 1]
            outgoing = f"{nxt}.weight"
            for between in range(idx + 1, nxt):
                if isinstance(model.layers[between], Flatten):
                    block = int(np.prod(shapes[between - 1][1:]))
        bias = f"{idx}.bias" if "bias" in model.layers[idx].params else None
        links[idx] = NodeLink(layer=idx, incoming=f"{idx}.weight", bias=bias, outgoing=outgoing, block=block)
    return links


@dataclass
class MaskSet:
    """
    Detached copy of a model's masks.

    `weights` holds the prunable weight masks (the sparsity denominator),
    `biases` the bias masks, `nodes` the node masks of every gate-bearing
    layer and `links` the node-to-weight mapping used by node pruning.
    """

    weights: Dict[str, np.ndarray] = field(default_factory=dict)
    biases: Dict[str, np.ndarray] = field(default_factory=dict)
    nodes: Dict[int, np.ndarray] = field(default_factory=dict)
    links: Dict[int, NodeLink] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Model) -> "MaskSet":
        weights = {name: model.mask_for(name).copy() for name in model.prunable_weights()}
        biases = {
            name: mask.copy() for name, mask in model.masks.items() if name not in weights
        }
        nodes = {idx: mask.copy() for idx, mask in model.node_masks.items()}
        return cls(weights=weights, biases=biases, nodes=nodes, links=node_links(model))

    def copy(self) -> "MaskSet":
        return MaskSet(
            weights={k: v.copy() for k, v in self.weights.items()},
            biases={k: v.copy() for k, v in self.biases.items()},
            nodes={k: v.copy() for k, v in self.nodes.items()},
            links=dict(self.links),
        )

    @property
    def total_weights(self) -> int:
        return int(sum(m.size for m in self.weights.values()))

    @property
    def pruned_weights(self) -> int:
        return int(sum(m.size - np.count_nonzero(m) for m in self.weights.values()))

    def weight_sparsity(self) -> float:
        total = self.total_weights
        return self.pruned_weights / total if total else 0.0

    def node_sparsity(self, layers: Optional[List[int]] = None) -> float:
        layers = list(self.nodes)[:-1] if layers is None else layers
        total = sum(self.nodes[idx].size for idx in layers)
        if total == 0:
            return 0.0
        return sum(self.nodes[idx].size - np.count_nonzero(self.nodes[idx]) for idx in layers) / total

    def node_weight_views(self, layer: int, node: int) -> List[np.ndarray]:
        """Views of the weight-mask entries owned by one node"""
        link = self.links[layer]
        views = [self.weights[link.incoming][node]]
        if link.outgoing is not None:
            views.append(self.weights[link.outgoing][:, node * link.block:(node + 1) * link.block])
        return views

    def mask_node(self, layer: int, node: int) -> int:
        """
        Prune one node: its incoming row, its bias and its outgoing columns.

        Returns:
            Number of weight entries newly masked
        """
        newly = 0
        for view in self.node_weight_views(layer, node):
            newly += int(np.count_nonzero(view))
            view[...] = 0.0
        link = self.links[layer]
        if link.bias is not None:
            self.biases[link.bias][node] = 0.0
        self.nodes[layer][node] = 0.0
        return newly

    def apply_to(self, model: Model) -> Model:
        """Write these masks into `model` and re-zero the masked parameters"""
        for name, mask in {**self.weights, **self.biases}.items():
            np.copyto(model.mask_for(name), mask)
        for idx, mask in self.nodes.items():
            np.copyto(model.node_masks[idx], mask)
        model.apply_masks()
        return model


def mask_nodes(model: Model, node_masks: Dict[int, np.ndarray]) -> Model:
    """Apply node masks to a model, masking every weight the pruned nodes own"""
    masks = MaskSet.from_model(model)
    for idx, mask in node_masks.items():
        for node in np.flatnonzero(mask == 0):
            masks.mask_node(idx, int(node))
    return masks.apply_to(model)


# ==================== Shrinking ====================

def _shrink_gate_layer(layer: Layer, keep_out: np.ndarray, keep_in: Optional[np.ndarray]) -> Layer:
    rows = np.flatnonzero(keep_out)
    cols = np.flatnonzero(keep_in) if keep_in is not None else None
    hp = layer.hyperparams()
    if isinstance(layer, Linear):
        hp["out_features"] = len(rows)
        if cols is not None:
            hp["in_features"] = len(cols)
        new = Linear(**hp)
    else:
        hp["out_channels"] = len(rows)
        if cols is not None:
            hp["in_channels"] = len(cols)
        new = Conv2d(**hp)

    for name, param in layer.params.items():
        data, mask = param.data[rows], layer.masks[name][rows]
        if name == "weight" and cols is not None:
            data, mask = data[:, cols], mask[:, cols]
        new.params[name].data = data.copy()
        new.masks[name] = mask.copy()
    return new


def _shrink_batch_norm(layer: Layer, keep: np.ndarray) -> Layer:
    idx = np.flatnonzero(keep)
    hp = layer.hyperparams()
    hp["num_features"] = len(idx)
    new = type(layer)(**hp)
    for name in ("weight", "bias"):
        new.params[name].data = layer.params[name].data[idx].copy()
    new.running_mean[...] = layer.running_mean[idx]
    new.running_var[...] = layer.running_var[idx]
    return new


def shrink_structured(model: Model, node_masks: Optional[Dict[int, np.ndarray]] = None) -> Model:
    """
    Physically remove pruned nodes, returning a smaller forward-equivalent model.

    Pruned output rows are dropped together with their bias and batch-norm
    entries, and the matching input columns of the next parameterised layer
    are removed. Across a Flatten the whole spatial block of each pruned
    channel is removed.

    Args:
        model: Model whose node masks mark the pruned nodes
        node_masks: Node masks to use instead of model.node_masks

    Raises:
        ValueError: A layer would be left without nodes
    """
    node_masks = model.node_masks if node_masks is None else node_masks
    output_layer = model.gate_layers()[-1]
    shapes = model.trace_shapes()

    layers: List[Layer] = []
    keep: Optional[np.ndarray] = None
    for idx, layer in enumerate(model.layers):
        if layer.has_gate:
            keep_out = np.ones(layer.num_nodes, dtype=bool) if idx == output_layer else node_masks[idx] > 0
            if not keep_out.any():
                raise ValueError(f"shrinking would remove every node of layer {idx}")
            layers.append(_shrink_gate_layer(layer, keep_out, keep))
            keep = keep_out
        elif isinstance(layer, (BatchNorm1d, BatchNorm2d)) and keep is not None:
            layers.append(_shrink_batch_norm(layer, keep))
        elif isinstance(layer, Flatten) and keep is not None:
            block = int(np.prod(shapes[idx - 1][1:]))
            keep = np.repeat(keep, block)
            layers.append(Flatten())
        else:
            layers.append(copy.deepcopy(layer))

    shrunk = Model(layers, model.input_shape, model.num_classes, name=model.name, width_scale=model.width_scale)
    shrunk.set_mode(model.mode)
    before, after = model.parameter_count(), shrunk.parameter_count()
    logger.info(f"Shrunk {model.name}: {before} -> {after} parameters")
    return shrunk
