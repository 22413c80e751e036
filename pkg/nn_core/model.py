"""
Model
Ordered layer sequence with named parameters, per-parameter masks and node masks
"""

import copy
import logging
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from nn_core.layers import Dropout, Layer, layer_from_config
from nn_core.tensor import ShapeError, Tensor

logger = logging.getLogger(__name__)


class Model:
    """
    Sequential network.

    Parameters are addressed as "<layer index>.<param name>" (e.g. "0.weight").
    Every Linear/Conv2d weight and bias carries a mask of identical shape;
    `node_masks` records which output nodes of each gate-bearing layer are alive.
    """

    def __init__(
        self,
        layers: Sequence[Layer],
        input_shape: Tuple[int, ...],
        num_classes: int,
        name: str = "custom",
        width_scale: float = 1.0,
    ):
        if not layers:
            raise ValueError("a model needs at least one layer")
        if any(d < 1 for d in input_shape) or num_classes < 1:
            raise ValueError(f"dimensions must be positive: input {input_shape}, classes {num_classes}")
        self.layers: List[Layer] = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        self.name = name
        self.width_scale = width_scale
        self.node_masks: Dict[int, np.ndarray] = {
            idx: np.ones(layer.num_nodes) for idx, layer in enumerate(self.layers) if layer.has_gate
        }
        self.training = True
        self._shape_cache: Optional[List[Tuple[int, ...]]] = None
        self._last_loss = None

    # ==================== Mode ====================

    def train(self) -> "Model":
        self.training = True
        for layer in self.layers:
            layer.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        for layer in self.layers:
            layer.training = False
        return self

    @property
    def mode(self) -> str:
        return "train" if self.training else "eval"

    def set_mode(self, mode: str) -> "Model":
        return self.train() if mode == "train" else self.eval()

    def reseed(self, seed: Union[int, Sequence[int]]) -> None:
        """Reset every dropout stream from one seed"""
        streams = np.random.SeedSequence(seed).spawn(len(self.layers))
        for layer, stream in zip(self.layers, streams):
            if isinstance(layer, Dropout):
                layer.rng = np.random.default_rng(stream)

    # ==================== Parameters ====================

    def named_parameters(self) -> Iterator[Tuple[str, Tensor]]:
        for idx, layer in enumerate(self.layers):
            for name, param in layer.params.items():
                yield f"{idx}.{name}", param

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def gates(self) -> Dict[int, Tensor]:
        return {idx: layer.gate for idx, layer in enumerate(self.layers) if layer.has_gate}

    @property
    def masks(self) -> Dict[str, np.ndarray]:
        """Live view of every parameter mask keyed like `named_parameters`"""
        return {
            f"{idx}.{name}": mask
            for idx, layer in enumerate(self.layers)
            for name, mask in layer.masks.items()
        }

    def mask_for(self, name: str) -> Optional[np.ndarray]:
        idx, param = name.split(".", 1)
        return self.layers[int(idx)].masks.get(param)

    def prunable_weights(self) -> List[str]:
        """Weight tensors that count towards sparsity (Linear/Conv2d weights)"""
        return [f"{idx}.weight" for idx, layer in enumerate(self.layers) if layer.has_gate]

    def gate_layers(self) -> List[int]:
        return [idx for idx, layer in enumerate(self.layers) if layer.has_gate]

    def hidden_gate_layers(self) -> List[int]:
        """Gate-bearing layers eligible for node pruning (all but the output layer)"""
        return self.gate_layers()[:-1]

    def apply_masks(self) -> None:
        """Re-zero every masked parameter entry"""
        for layer in self.layers:
            for name, mask in layer.masks.items():
                layer.params[name].data *= mask

    def zero_grad(self) -> None:
        for _, param in self.named_parameters():
            param.zero_grad()
        for gate in self.gates().values():
            gate.zero_grad()

    def parameter_count(self, effective: bool = False) -> int:
        """Count parameters; with `effective` only unmasked entries are counted"""
        total = 0
        for name, param in self.named_parameters():
            mask = self.mask_for(name)
            total += int(mask.sum()) if (effective and mask is not None) else param.size
        return total

    # ==================== Forward ====================

    def logits(self, inputs: Tensor) -> Tensor:
        if tuple(inputs.shape[1:]) != self.input_shape:
            raise ShapeError(f"{self.name} expects inputs (N, {self.input_shape}), got {inputs.shape}")
        if inputs.shape[0] == 0:
            raise ShapeError("empty batch")
        out = inputs
        for layer in self.layers:
            out = layer(out)
        return out

    def trace_shapes(self) -> List[Tuple[int, ...]]:
        """Per-layer output shapes (without batch axis) for a single sample"""
        if self._shape_cache is None:
            previous = self.mode
            self.eval()
            out = Tensor(np.zeros((1,) + self.input_shape))
            shapes = []
            for layer in self.layers:
                out = layer(out)
                shapes.append(tuple(out.shape[1:]))
            self.set_mode(previous)
            self._shape_cache = shapes
        return list(self._shape_cache)

    # ==================== Serialisation ====================

    def architecture(self) -> List[Dict[str, Any]]:
        return [{"kind": layer.kind, "hyperparams": layer.hyperparams()} for layer in self.layers]

    def signature(self) -> Tuple[Tuple[str, Tuple[int, ...]], ...]:
        """Parameter names and shapes; two models with equal signatures are interchangeable"""
        return tuple((name, param.shape) for name, param in self.named_parameters())

    @classmethod
    def from_architecture(cls, architecture: List[Dict[str, Any]], input_shape, num_classes,
                          name: str = "custom", width_scale: float = 1.0) -> "Model":
        layers = [layer_from_config(entry["kind"], entry["hyperparams"]) for entry in architecture]
        return cls(layers, tuple(input_shape), num_classes, name=name, width_scale=width_scale)

    def clone(self) -> "Model":
        """Deep copy without the recorded loss graph or gradients; the source is left as is"""
        memo = {} if self._last_loss is None else {id(self._last_loss): None}
        twin = copy.deepcopy(self, memo)
        twin._last_loss = None
        twin.zero_grad()
        return twin
