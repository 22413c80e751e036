"""
Ranking
Global ascending-score pruning of weights, nodes or both, with structural safeguards
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from prune.schedule import PruneTarget
from prune.scores import ScoreMap
from prune.structure import MaskSet

logger = logging.getLogger(__name__)


class UnreachableSparsityWarning(UserWarning):
    """Safeguards or exhausted candidates stopped pruning short of the requested sparsity"""


def _warn_unreachable(message: str) -> None:
    logger.warning(message)
    warnings.warn(message, UnreachableSparsityWarning, stacklevel=3)


@dataclass(frozen=True)
class Safeguards:
    """
    Structural limits on node pruning.

    Output-layer nodes are never candidates and input features carry no gate,
    so only hidden layers are ranked; each keeps at least `min_nodes`.
    """

    min_nodes: int = 1


@dataclass
class PruneResult:
    masks: MaskSet
    requested: float
    achieved: float
    pruned_weights: Dict[str, int] = field(default_factory=dict)
    pruned_nodes: Dict[int, int] = field(default_factory=dict)

    @property
    def reached(self) -> bool:
        total = self.masks.total_weights or 1
        return self.achieved >= self.requested - 1.0 / total


# relative gap below which two scores rank as tied
TIE_RTOL = 1e-9


def _target_count(kappa: float, total: int) -> int:
    return int(round(kappa * total))


def _check_monotone(kappa_target: float, current: float, total: int) -> None:
    if kappa_target < current - 1.0 / max(total, 1):
        raise ValueError(f"target sparsity {kappa_target:.4f} is below current sparsity {current:.4f}; masks never shrink")


def _ascending(values: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """
    Candidates by ascending score. Scores within TIE_RTOL of their neighbour
    form one tie group, ordered by position, so any positive rescaling of the
    scores yields the same order.
    """
    if candidates.size == 0:
        return candidates
    by_value = candidates[np.argsort(values[candidates], kind="stable")]
    ranked = values[by_value]
    breaks = np.diff(ranked) > TIE_RTOL * np.abs(ranked[1:])
    group = np.concatenate([[0], np.cumsum(breaks)])
    return by_value[np.lexsort((by_value, group))]


def _flat_candidates(scores: Dict, masks: Dict) -> Tuple[np.ndarray, np.ndarray, List, np.ndarray]:
    """Concatenated scores of unmasked positions, ascending, ties in (layer, flat index) order"""
    keys = list(masks)
    offsets = np.cumsum([0] + [masks[k].size for k in keys])
    flat_scores = np.concatenate([np.asarray(scores[k], dtype=np.float64).reshape(-1) for k in keys])
    alive = np.concatenate([masks[k].reshape(-1) > 0 for k in keys])
    candidates = np.flatnonzero(alive & np.isfinite(flat_scores))
    order = _ascending(flat_scores, candidates)
    return order, flat_scores, keys, offsets


def _locate(flat_index: int, keys: List, offsets: np.ndarray) -> Tuple[object, int]:
    pos = int(np.searchsorted(offsets, flat_index, side="right") - 1)
    return keys[pos], int(flat_index - offsets[pos])


def prune_weights(scores: ScoreMap, masks: MaskSet, kappa_target: float) -> PruneResult:
    """Mask the lowest-scoring unmasked weights until weight sparsity reaches kappa_target"""
    masks = masks.copy()
    total = masks.total_weights
    _check_monotone(kappa_target, masks.weight_sparsity(), total)
    needed = max(0, _target_count(kappa_target, total) - masks.pruned_weights)

    order, _, keys, offsets = _flat_candidates(scores.weights, masks.weights)
    if needed > len(order):
        _warn_unreachable(f"Only {len(order)} weights left to prune, {needed} requested")
    chosen = order[:needed]

    pruned: Dict[str, int] = {}
    for pos, key in enumerate(keys):
        local = chosen[(chosen >= offsets[pos]) & (chosen < offsets[pos + 1])] - offsets[pos]
        masks.weights[key].reshape(-1)[local] = 0.0
        pruned[key] = int(len(local))
    return PruneResult(masks=masks, requested=kappa_target, achieved=masks.weight_sparsity(), pruned_weights=pruned)


def prune_nodes(
    scores: ScoreMap,
    masks: MaskSet,
    kappa_target: float,
    safeguards: Safeguards = Safeguards(),
) -> PruneResult:
    """
    Prune the lowest-scoring hidden nodes until node sparsity reaches kappa_target.

    A node whose removal would leave its layer below `safeguards.min_nodes`
    is skipped and the deficit is taken from the next candidates.
    """
    masks = masks.copy()
    hidden = list(masks.nodes)[:-1]
    total = sum(masks.nodes[idx].size for idx in hidden)
    _check_monotone(kappa_target, masks.node_sparsity(hidden), total)
    already = int(sum(masks.nodes[idx].size - np.count_nonzero(masks.nodes[idx]) for idx in hidden))
    needed = max(0, _target_count(kappa_target, total) - already)

    node_masks = {idx: masks.nodes[idx] for idx in hidden}
    order, _, keys, offsets = _flat_candidates({idx: scores.nodes[idx] for idx in hidden}, node_masks)
    alive = {idx: int(np.count_nonzero(masks.nodes[idx])) for idx in hidden}
    pruned_nodes = {idx: 0 for idx in hidden}
    before = {name: int(np.count_nonzero(m)) for name, m in masks.weights.items()}

    done = 0
    for flat in order:
        if done >= needed:
            break
        layer, node = _locate(int(flat), keys, offsets)
        if alive[layer] <= safeguards.min_nodes:
            continue
        masks.mask_node(layer, node)
        alive[layer] -= 1
        pruned_nodes[layer] += 1
        done += 1

    achieved = masks.node_sparsity(hidden)
    if done < needed:
        _warn_unreachable(f"Safeguards limit node sparsity to {achieved:.4f} (requested {kappa_target:.4f})")
    pruned_weights = {name: before[name] - int(np.count_nonzero(m)) for name, m in masks.weights.items()}
    return PruneResult(masks=masks, requested=kappa_target, achieved=achieved,
                       pruned_weights=pruned_weights, pruned_nodes=pruned_nodes)


def prune_union(
    scores: ScoreMap,
    masks: MaskSet,
    kappa_target: float,
    safeguards: Safeguards = Safeguards(),
) -> PruneResult:
    """
    Rank weights and hidden nodes in one pool and prune until weight sparsity reaches kappa_target.

    Pruning a node masks every weight it owns, and those count towards the
    target. At equal scores weights go before nodes.
    """
    masks = masks.copy()
    total = masks.total_weights
    _check_monotone(kappa_target, masks.weight_sparsity(), total)
    needed = max(0, _target_count(kappa_target, total) - masks.pruned_weights)
    before = {name: int(np.count_nonzero(m)) for name, m in masks.weights.items()}

    w_order, w_scores, w_keys, _ = _flat_candidates(scores.weights, masks.weights)
    # one backing store, so node pruning through the per-layer views shows up in `flat`
    flat = np.concatenate([masks.weights[k].reshape(-1) for k in w_keys])
    offset = 0
    for key in w_keys:
        shape = masks.weights[key].shape
        masks.weights[key] = flat[offset:offset + int(np.prod(shape))].reshape(shape)
        offset += int(np.prod(shape))

    hidden = list(masks.nodes)[:-1]
    n_order, n_scores, n_keys, n_offsets = _flat_candidates(
        {idx: scores.nodes[idx] for idx in hidden}, {idx: masks.nodes[idx] for idx in hidden}
    )
    alive_nodes = {idx: int(np.count_nonzero(masks.nodes[idx])) for idx in hidden}
    pruned_nodes = {idx: 0 for idx in hidden}
    # running max keeps the tolerance-ordered weights searchable
    sorted_w = np.maximum.accumulate(w_scores[w_order]) if w_order.size else np.zeros(0)
    cursor = 0
    done = 0

    def take_weights(limit: int) -> None:
        nonlocal cursor, done
        block = w_order[cursor:limit]
        cursor = limit
        still = block[flat[block] > 0]
        take = still[:needed - done]
        flat[take] = 0.0
        done += len(take)

    for pos in n_order:
        if done >= needed:
            break
        node_score = n_scores[pos]
        take_weights(int(np.searchsorted(sorted_w, node_score + TIE_RTOL * abs(node_score), side="right")))
        layer, node = _locate(int(pos), n_keys, n_offsets)
        if done >= needed or alive_nodes[layer] <= safeguards.min_nodes:
            continue
        done += masks.mask_node(layer, node)
        alive_nodes[layer] -= 1
        pruned_nodes[layer] += 1
    if done < needed:
        take_weights(len(w_order))
    if done < needed:
        _warn_unreachable(f"Only {done} of {needed} requested weights could be pruned")

    pruned_weights = {name: before[name] - int(np.count_nonzero(m)) for name, m in masks.weights.items()}
    return PruneResult(masks=masks, requested=kappa_target, achieved=masks.weight_sparsity(),
                       pruned_weights=pruned_weights, pruned_nodes=pruned_nodes)


def rank_and_prune(
    scores: ScoreMap,
    masks: MaskSet,
    kappa_target: float,
    safeguards: Safeguards = Safeguards(),
    target: PruneTarget = PruneTarget.WEIGHTS,
) -> PruneResult:
    """
    Globally rank unmasked positions by ascending score and prune the lowest.

    Ties are broken in (layer index, flat index) order. Masks only ever
    lose entries.

    Args:
        scores: Elasticities (or any nonnegative scores) aligned with `masks`
        masks: Current masks; not modified
        kappa_target: Requested sparsity (weights for weights/union, hidden nodes for nodes)
        safeguards: Node pruning limits
        target: What to rank

    Returns:
        PruneResult with the new masks and the achieved sparsity

    Raises:
        ValueError: kappa_target is below the current sparsity
    """
    target = PruneTarget(target)
    if target is PruneTarget.WEIGHTS:
        return prune_weights(scores, masks, kappa_target)
    if target is PruneTarget.NODES:
        return prune_nodes(scores, masks, kappa_target, safeguards)
    return prune_union(scores, masks, kappa_target, safeguards)
