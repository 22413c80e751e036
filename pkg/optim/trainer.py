"""
Trainer
Seeded mini-batch training loop with per-epoch metrics
"""

import logging
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from config import settings
from data.batching import BatchIterator
from data.datasets import Dataset
from nn_core.engine import backward, evaluate, forward
from nn_core.model import Model
from optim.adam import OptimState, adam_step

logger = logging.getLogger(__name__)


class EpochMetrics(BaseModel):
    """One row of the per-epoch metrics table"""
    epoch: int = Field(..., ge=0, description="1-based global epoch index")
    train_loss: float
    train_acc: float = Field(..., ge=0.0, le=1.0)
    test_acc: Optional[float] = Field(None, ge=0.0, le=1.0)
    val_acc: Optional[float] = Field(None, ge=0.0, le=1.0)


def train_epochs(
    model: Model,
    dataset: Dataset,
    n_epochs: int,
    optim_state: OptimState,
    seed: int,
    batch_size: int = settings.BATCH_SIZE,
    start_epoch: int = 0,
    flip_probability: float = 0.0,
    test_set: Optional[Dataset] = None,
    val_set: Optional[Dataset] = None,
    on_epoch_end: Optional[Callable[[int, Model], None]] = None,
) -> List[EpochMetrics]:
    """
    Train `model` in place for `n_epochs` with Adam.

    Shuffling, augmentation and dropout draws are derived from (seed, epoch),
    so two calls with the same arguments give identical parameters.
    `start_epoch` continues the epoch numbering when training is split across
    pruning events.

    Args:
        model: Model to train (switched to train mode, left in eval mode)
        dataset: Training set
        n_epochs: Number of epochs; 0 leaves the model unchanged
        optim_state: Adam state, updated in place
        seed: Run seed
        batch_size: Mini-batch size
        start_epoch: Number of epochs already trained
        flip_probability: Horizontal flip probability for image batches
        test_set: Evaluated after every epoch when given
        val_set: Held-out split evaluated after every epoch when given
        on_epoch_end: Called with (global epoch, model) after each epoch

    Returns:
        One EpochMetrics per epoch
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if n_epochs < 0:
        raise ValueError(f"n_epochs must be non-negative, got {n_epochs}")

    batches = BatchIterator(dataset, batch_size=batch_size, seed=seed, flip_probability=flip_probability)
    history: List[EpochMetrics] = []

    for offset in range(n_epochs):
        epoch = start_epoch + offset
        model.train()
        model.reseed([seed, epoch])
        total_loss = 0.0
        correct = 0

        for images, labels in batches.epoch(epoch):
            loss, logits = forward(model, images, labels)
            backward(model, loss)
            adam_step(model, optim_state)
            total_loss += loss.scalar * len(labels)
            correct += int((logits.data.argmax(axis=1) == labels).sum())

        model.eval()
        row = EpochMetrics(
            epoch=epoch + 1,
            train_loss=total_loss / len(dataset),
            train_acc=correct / len(dataset),
        )
        if test_set is not None:
            row.test_acc = evaluate(model, test_set.images, test_set.labels, batch_size)[1]
        if val_set is not None:
            row.val_acc = evaluate(model, val_set.images, val_set.labels, batch_size)[1]
        history.append(row)

        logger.info(
            f"Epoch {row.epoch}: loss={row.train_loss:.4f} train_acc={row.train_acc:.4f}"
            + (f" test_acc={row.test_acc:.4f}" if row.test_acc is not None else "")
        )
        if not np.isfinite(row.train_loss):
            logger.warning(f"Non-finite training loss at epoch {row.epoch}")
        if on_epoch_end is not None:
            on_epoch_end(epoch + 1, model)

    model.zero_grad()
    model._last_loss = None
    return history
