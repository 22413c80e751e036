"""
Pruning Drivers
Iterative elasticity pruning of weights (SNIP-it), nodes (SNAP-it) or both (CNIP-it)
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from config import settings
from data.batching import criterion_batch
from data.datasets import Dataset
from nn_core.model import Model
from optim.adam import OptimState
from optim.trainer import EpochMetrics, train_epochs
from prune.ranking import PruneResult, Safeguards, rank_and_prune
from prune.schedule import PruneSchedule, PruneTarget
from prune.scores import ScoreMap, criterion_loss, node_elasticity, union_elasticity, weight_elasticity
from prune.structure import MaskSet, shrink_structured

logger = logging.getLogger(__name__)


# ==================== Event log ====================

class PruneEvent(BaseModel):
    """One pruning event, serialised as one JSON line"""
    step: int = Field(..., ge=0)
    target: str
    epoch: int = Field(..., ge=0, description="Training epochs completed before the event")
    kappa_requested: float
    kappa_achieved: float
    weight_sparsity: float
    node_sparsity: float
    per_layer_pruned: Dict[str, int] = Field(default_factory=dict)
    nodes_pruned: Dict[str, int] = Field(default_factory=dict)
    loss_before: float
    loss_after: float
    normalised: bool = True


class PruneEventLog(BaseModel):
    method: str
    events: List[PruneEvent] = Field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(event.model_dump(), sort_keys=True) + "\n" for event in self.events)

    @classmethod
    def from_jsonl(cls, method: str, text: str) -> "PruneEventLog":
        events = [PruneEvent(**json.loads(line)) for line in text.splitlines() if line.strip()]
        return cls(method=method, events=events)


@dataclass
class PruneOutcome:
    """
    Result of a pruning driver.

    `resume_epoch` is the epoch the remaining training budget continues from.
    """

    model: Model
    log: PruneEventLog
    optim_state: OptimState
    history: List[EpochMetrics] = field(default_factory=list)
    resume_epoch: int = 0


# ==================== Shared event loop ====================

def _score(model: Model, batches, target: PruneTarget) -> ScoreMap:
    if target is PruneTarget.WEIGHTS:
        return weight_elasticity(model, batches, allow_unnormalised=True)
    if target is PruneTarget.NODES:
        return node_elasticity(model, batches, allow_unnormalised=True)
    return union_elasticity(model, batches, allow_unnormalised=True)


def record_event(step: int, target: PruneTarget, epoch: int, result: PruneResult,
            loss_before: float, loss_after: float, normalised: bool) -> PruneEvent:
    return PruneEvent(
        step=step,
        target=target.value,
        epoch=epoch,
        kappa_requested=result.requested,
        kappa_achieved=result.achieved,
        weight_sparsity=result.masks.weight_sparsity(),
        node_sparsity=result.masks.node_sparsity(),
        per_layer_pruned=result.pruned_weights,
        nodes_pruned={str(idx): count for idx, count in result.pruned_nodes.items()},
        loss_before=loss_before,
        loss_after=loss_after,
        normalised=normalised,
    )


def iterative_prune(
    model: Model,
    dataset: Dataset,
    schedule: PruneSchedule,
    optim_state: Optional[OptimState] = None,
    seed: int = 0,
    method: str = "snip-it",
    safeguards: Safeguards = Safeguards(),
    criterion_size: int = settings.CRITERION_BATCH_SIZE,
    batch_size: int = settings.BATCH_SIZE,
    test_set: Optional[Dataset] = None,
    val_set: Optional[Dataset] = None,
    flip_probability: float = 0.0,
) -> PruneOutcome:
    """
    Run the pruning schedule on `model` in place.

    Before every intermediate event `schedule.tau` epochs are trained; each
    event draws a fresh criterion batch, scores the model in eval mode,
    ranks and prunes to the event's sparsity. The last event prunes to
    kappa_final directly after the last intermediate one.
    """
    optim_state = optim_state or OptimState()
    target = PruneTarget(schedule.target)
    log = PruneEventLog(method=method)
    history: List[EpochMetrics] = []
    epoch = 0

    for step, kappa in enumerate(schedule.event_kappas()):
        if schedule.trains_before(step):
            history += train_epochs(model, dataset, schedule.tau, optim_state, seed,
                                    batch_size=batch_size, start_epoch=epoch, test_set=test_set,
                                    val_set=val_set, flip_probability=flip_probability)
            epoch += schedule.tau

        batches = criterion_batch(dataset, size=criterion_size, seed=seed, event=step)
        scores = _score(model, batches, target)
        masks = MaskSet.from_model(model)
        kappa = max(kappa, masks.weight_sparsity()) if target is not PruneTarget.NODES else kappa
        result = rank_and_prune(scores, masks, kappa, safeguards, target)
        result.masks.apply_to(model)
        loss_after = criterion_loss(model, batches)

        event = record_event(step, target, epoch, result, scores.loss, loss_after, scores.normalised)
        log.events.append(event)
        logger.info(
            f"[{method}] event {step}: requested {kappa:.4f} achieved {result.achieved:.4f} "
            f"loss {scores.loss:.4f} -> {loss_after:.4f}"
        )

    if not schedule.within_epsilon():
        logger.debug(f"last intermediate step is more than epsilon={schedule.epsilon} from kappa_final")
    return PruneOutcome(model=model, log=log, optim_state=optim_state, history=history, resume_epoch=epoch)


# ==================== Methods ====================

def snip(model: Model, dataset: Dataset, kappa: float, seed: int = 0, **kwargs) -> PruneOutcome:
    """One-shot elasticity pruning before training"""
    schedule = PruneSchedule(kappa_final=kappa, tau=0, steps=1, target=PruneTarget.WEIGHTS)
    return iterative_prune(model, dataset, schedule, seed=seed, method="snip", **kwargs)


def snip_it(model: Model, dataset: Dataset, schedule: PruneSchedule,
            optim_state: Optional[OptimState] = None, seed: int = 0, **kwargs) -> PruneOutcome:
    """
    Iterative unstructured pruning, before training (tau = 0) or during it (tau > 0).

    With steps = 1 and tau = 0 this is exactly one-shot SNIP.
    """
    if PruneTarget(schedule.target) is not PruneTarget.WEIGHTS:
        raise ValueError(f"snip-it prunes weights, schedule targets {schedule.target}")
    return iterative_prune(model, dataset, schedule, optim_state, seed, method="snip-it", **kwargs)


def snap_it(model: Model, dataset: Dataset, schedule: PruneSchedule, seed: int = 0,
            safeguards: Safeguards = Safeguards(), **kwargs) -> PruneOutcome:
    """
    Iterative structured pruning before training, followed by one physical shrink.

    `schedule.kappa_final` is the hidden-node sparsity. The returned model is
    the shrunk one, with a fresh optimiser state.
    """
    if PruneTarget(schedule.target) is not PruneTarget.NODES:
        raise ValueError(f"snap-it prunes nodes, schedule targets {schedule.target}")
    if schedule.tau != 0:
        raise ValueError("snap-it prunes before training; tau must be 0")
    outcome = iterative_prune(model, dataset, schedule, seed=seed, method="snap-it", safeguards=safeguards, **kwargs)
    outcome.model = shrink_structured(outcome.model)
    outcome.optim_state.reset()
    return outcome


def cnip_it(model: Model, dataset: Dataset, schedule: PruneSchedule,
            optim_state: Optional[OptimState] = None, seed: int = 0,
            safeguards: Safeguards = Safeguards(), **kwargs) -> PruneOutcome:
    """Iterative pruning over one pool of weights and nodes; sparsity is counted over weights"""
    if PruneTarget(schedule.target) is not PruneTarget.UNION:
        raise ValueError(f"cnip-it prunes the union of weights and nodes, schedule targets {schedule.target}")
    return iterative_prune(model, dataset, schedule, optim_state, seed, method="cnip-it",
                           safeguards=safeguards, **kwargs)
