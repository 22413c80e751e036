"""
Baselines
Random pruning and global iterative magnitude pruning with weight rewinding
"""

import logging
from typing import Optional

import numpy as np

from config import settings
from data.batching import criterion_batch
from data.datasets import Dataset
from nn_core.model import Model
from optim.adam import OptimState
from optim.snapshot import restore_weights, snapshot_weights
from optim.trainer import train_epochs
from prune.drivers import PruneEventLog, PruneOutcome, record_event
from prune.ranking import PruneResult, Safeguards, rank_and_prune
from prune.schedule import PruneSchedule, PruneTarget
from prune.scores import ScoreMap, criterion_loss
from prune.structure import MaskSet

logger = logging.getLogger(__name__)


def random_prune(
    model: Model,
    kappa: float,
    seed: int,
    target: PruneTarget = PruneTarget.WEIGHTS,
    safeguards: Safeguards = Safeguards(),
) -> PruneResult:
    """
    Prune a uniformly random selection of unmasked weights (or hidden nodes) to `kappa`.

    Random scores go through the same ranking as elasticities, so node
    safeguards apply unchanged. The masks are written into `model`.
    """
    if not 0.0 <= kappa < 1.0:
        raise ValueError(f"kappa must lie in [0, 1), got {kappa}")
    target = PruneTarget(target)
    rng = np.random.default_rng(seed)
    masks = MaskSet.from_model(model)
    scores = ScoreMap(
        weights={name: rng.random(mask.shape) for name, mask in masks.weights.items()},
        nodes={idx: rng.random(mask.shape) for idx, mask in masks.nodes.items()},
    )
    result = rank_and_prune(scores, masks, kappa, safeguards, target)
    result.masks.apply_to(model)
    logger.info(f"Random {target.value} pruning to {kappa:.4f}: achieved {result.achieved:.4f}")
    return result


def magnitude_scores(model: Model) -> ScoreMap:
    """|θ| of every unmasked prunable weight; masked entries get the sentinel"""
    params = model.parameters()
    weights = {}
    for name in model.prunable_weights():
        mask = model.mask_for(name)
        weights[name] = np.where(mask > 0, np.abs(params[name].data), -np.inf)
    return ScoreMap(weights=weights, normalised=False)


def imp_global(
    model: Model,
    dataset: Dataset,
    kappa_final: float,
    optim_state: Optional[OptimState] = None,
    seed: int = 0,
    tau: int = settings.IMP_INTERVAL,
    rewind_epoch: int = settings.REWIND_EPOCH,
    steps: int = settings.PRUNE_STEPS,
    batch_size: int = settings.BATCH_SIZE,
    criterion_size: int = settings.CRITERION_BATCH_SIZE,
    test_set: Optional[Dataset] = None,
    val_set: Optional[Dataset] = None,
    flip_probability: float = 0.0,
) -> PruneOutcome:
    """
    Global iterative magnitude pruning with rewinding.

    Train to `rewind_epoch` and snapshot; then for every sparsity of the
    halving schedule: train `tau` epochs, prune the smallest-magnitude
    surviving weights globally, rewind the weights to the snapshot (masks
    kept) and reset the optimiser. The returned model resumes training at
    `rewind_epoch`; the returned history covers the epochs up to the snapshot.
    """
    optim_state = optim_state or OptimState()
    schedule = PruneSchedule(kappa_final=kappa_final, tau=tau, steps=steps, target=PruneTarget.WEIGHTS)
    log = PruneEventLog(method="imp-global")

    history = train_epochs(model, dataset, rewind_epoch, optim_state, seed,
                           batch_size=batch_size, test_set=test_set, val_set=val_set,
                           flip_probability=flip_probability)
    snapshot = snapshot_weights(model, rewind_epoch)
    epoch = rewind_epoch

    for step, kappa in enumerate(schedule.event_kappas()):
        train_epochs(model, dataset, tau, optim_state, seed, batch_size=batch_size, start_epoch=epoch,
                     flip_probability=flip_probability)
        epoch += tau

        batches = criterion_batch(dataset, size=criterion_size, seed=seed, event=step)
        loss_before = criterion_loss(model, batches)
        masks = MaskSet.from_model(model)
        result = rank_and_prune(magnitude_scores(model), masks, max(kappa, masks.weight_sparsity()))
        result.masks.apply_to(model)
        loss_after = criterion_loss(model, batches)

        restore_weights(model, snapshot)
        optim_state.reset()
        log.events.append(record_event(step, PruneTarget.WEIGHTS, epoch, result, loss_before, loss_after, False))
        logger.info(f"[imp-global] round {step}: pruned to {result.achieved:.4f}, rewound to epoch {rewind_epoch}")

    return PruneOutcome(model=model, log=log, optim_state=optim_state, history=history, resume_epoch=rewind_epoch)
