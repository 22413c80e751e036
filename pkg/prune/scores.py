"""
Elasticity Scores
Loss-normalised derivative-magnitude products for weights and gated nodes
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from nn_core.engine import backward, forward
from nn_core.model import Model

logger = logging.getLogger(__name__)

PRUNED = -np.inf

Batch = Tuple[np.ndarray, np.ndarray]


class DegenerateLossError(ArithmeticError):
    """Raised when the criterion loss is zero or non-finite and cannot normalise scores"""


@dataclass
class CriterionGradients:
    """Mean loss and mean gradients over an accumulated criterion batch"""

    loss: float
    params: Dict[str, np.ndarray] = field(repr=False)
    gates: Dict[int, np.ndarray] = field(repr=False)
    samples: int = 0


@dataclass
class ScoreMap:
    """
    Elasticity scores aligned with the model's masks.

    `weights` holds one array per prunable weight tensor (same shape as its
    mask) and `nodes` one vector per gate-bearing layer. Pruned positions
    carry the -inf sentinel.
    """

    weights: Dict[str, np.ndarray] = field(default_factory=dict)
    nodes: Dict[int, np.ndarray] = field(default_factory=dict)
    loss: float = 1.0
    normalised: bool = True

    def finite_weight_scores(self) -> np.ndarray:
        if not self.weights:
            return np.zeros(0)
        flat = np.concatenate([s.reshape(-1) for s in self.weights.values()])
        return flat[np.isfinite(flat)]

    def finite_node_scores(self) -> np.ndarray:
        if not self.nodes:
            return np.zeros(0)
        flat = np.concatenate([s.reshape(-1) for s in self.nodes.values()])
        return flat[np.isfinite(flat)]

    def scaled(self, factor: float) -> "ScoreMap":
        return replace(
            self,
            weights={name: s * factor for name, s in self.weights.items()},
            nodes={idx: s * factor for idx, s in self.nodes.items()},
        )


def _as_batches(batches) -> List[Batch]:
    if isinstance(batches, tuple) and len(batches) == 2 and isinstance(batches[0], np.ndarray):
        return [batches]
    return list(batches)


def accumulate_gradients(model: Model, batches: Sequence[Batch]) -> CriterionGradients:
    """
    Mean loss and gradients over several sub-batches, in eval mode.

    Each sub-batch contributes in proportion to its size, so the result equals
    the gradient of the mean loss over the concatenated batch.
    """
    batches = _as_batches(batches)
    total = sum(len(labels) for _, labels in batches)
    if total == 0:
        raise ValueError("criterion batch is empty")

    previous = model.mode
    model.eval()
    loss_sum = 0.0
    params: Dict[str, np.ndarray] = {}
    gates: Dict[int, np.ndarray] = {}
    for images, labels in batches:
        weight = len(labels) / total
        loss, _ = forward(model, images, labels)
        grads = backward(model, loss)
        loss_sum += loss.scalar * weight
        for name, grad in grads.params.items():
            params[name] = params.get(name, 0.0) + grad * weight
        for idx, grad in grads.gates.items():
            gates[idx] = gates.get(idx, 0.0) + grad * weight
    model.zero_grad()
    model._last_loss = None
    model.set_mode(previous)
    return CriterionGradients(loss=loss_sum, params=params, gates=gates, samples=total)


def criterion_loss(model: Model, batches: Sequence[Batch]) -> float:
    """Eval-mode mean loss over a criterion batch, without a backward pass"""
    batches = _as_batches(batches)
    total = sum(len(labels) for _, labels in batches)
    previous = model.mode
    model.eval()
    value = sum(forward(model, images, labels)[0].scalar * len(labels) for images, labels in batches) / total
    model._last_loss = None
    model.set_mode(previous)
    return value


def _normaliser(loss: float, allow_unnormalised: bool) -> Tuple[float, bool]:
    if np.isfinite(loss) and loss > 0.0:
        return loss, True
    if not allow_unnormalised:
        raise DegenerateLossError(f"criterion loss is {loss}; elasticities are undefined")
    logger.warning(f"Criterion loss is {loss}; ranking on unnormalised |g * theta| instead")
    return 1.0, False


def weight_scores(model: Model, grads: CriterionGradients, allow_unnormalised: bool = False) -> ScoreMap:
    """|dL/dθ · θ| / L for every prunable weight entry; masked entries get the sentinel"""
    normaliser, normalised = _normaliser(grads.loss, allow_unnormalised)
    params = model.parameters()
    weights = {}
    for name in model.prunable_weights():
        mask = model.mask_for(name)
        effective = params[name].data * mask
        score = np.abs(grads.params[name] * effective) / normaliser
        weights[name] = np.where(mask > 0, score, PRUNED)
    return ScoreMap(weights=weights, loss=grads.loss, normalised=normalised)


def node_scores(model: Model, grads: CriterionGradients, allow_unnormalised: bool = False) -> ScoreMap:
    """|dL/dc| / L for every gate; pruned nodes get the sentinel"""
    normaliser, normalised = _normaliser(grads.loss, allow_unnormalised)
    nodes = {}
    for idx in model.gate_layers():
        score = np.abs(grads.gates[idx]) / normaliser
        nodes[idx] = np.where(model.node_masks[idx] > 0, score, PRUNED)
    return ScoreMap(nodes=nodes, loss=grads.loss, normalised=normalised)


def weight_elasticity(model: Model, batches: Sequence[Batch], allow_unnormalised: bool = False) -> ScoreMap:
    """
    Weight elasticities over an accumulated criterion batch.

    Args:
        model: Model to score (evaluated in eval mode; its mode is restored)
        batches: Criterion sub-batches as (images, labels) pairs, or one pair
        allow_unnormalised: On a zero or non-finite loss, rank on |g * theta|
            instead of raising

    Raises:
        DegenerateLossError: The criterion loss cannot normalise the scores
    """
    return weight_scores(model, accumulate_gradients(model, batches), allow_unnormalised)


def node_elasticity(model: Model, batches: Sequence[Batch], allow_unnormalised: bool = False) -> ScoreMap:
    """Node elasticities from the gate gradients; see weight_elasticity"""
    return node_scores(model, accumulate_gradients(model, batches), allow_unnormalised)


def union_elasticity(model: Model, batches: Sequence[Batch], allow_unnormalised: bool = False) -> ScoreMap:
    """Weight and node elasticities from a single accumulated pass"""
    grads = accumulate_gradients(model, batches)
    weights = weight_scores(model, grads, allow_unnormalised)
    nodes = node_scores(model, grads, allow_unnormalised)
    return replace(weights, nodes=nodes.nodes)
