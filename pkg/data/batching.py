"""
Batching
Seeded epoch iteration, flip augmentation and the criterion batch accumulator
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np

from config import settings
from data.datasets import Dataset

logger = logging.getLogger(__name__)

Batch = Tuple[np.ndarray, np.ndarray]


def augment(batch: np.ndarray, flip_probability: float, rng: np.random.Generator) -> np.ndarray:
    """
    Mirror each image of a 4-D batch along its width axis with the given probability.

    The input is never modified; with probability 0 it is returned as is.
    """
    if batch.ndim != 4:
        raise ValueError(f"augment expects an (N, C, H, W) batch, got {batch.shape}")
    if flip_probability <= 0.0:
        return batch
    flips = rng.random(len(batch)) < flip_probability
    out = batch.copy()
    out[flips] = out[flips, :, :, ::-1]
    return out


@dataclass
class BatchIterator:
    """
    Shuffled mini-batches over a Dataset.

    Each epoch is a fresh permutation drawn from (seed, epoch); the final
    partial batch is kept.
    """

    dataset: Dataset
    batch_size: int = settings.BATCH_SIZE
    seed: int = 0
    flip_probability: float = 0.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")

    def __len__(self) -> int:
        return -(-len(self.dataset) // self.batch_size)

    def permutation(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(len(self.dataset))

    def epoch(self, epoch: int) -> Iterator[Batch]:
        rng = np.random.default_rng([self.seed, epoch, 1])
        order = self.permutation(epoch)
        images, labels = self.dataset.images, self.dataset.labels
        for start in range(0, len(order), self.batch_size):
            idx = order[start:start + self.batch_size]
            batch = images[idx]
            if self.flip_probability > 0.0 and batch.ndim == 4:
                batch = augment(batch, self.flip_probability, rng)
            yield batch, labels[idx]


def criterion_batch(
    dataset: Dataset,
    size: int = settings.CRITERION_BATCH_SIZE,
    seed: int = 0,
    sub_batch: int = settings.CRITERION_SUB_BATCH,
    event: Optional[int] = None,
) -> List[Batch]:
    """
    Sample `size` examples without replacement, split into sub-batches.

    The default 2560 samples come back as five sub-batches of 512 so
    gradients can be accumulated with bounded memory. A dataset smaller than
    `size` is used whole, with a warning.

    Args:
        dataset: Source dataset
        size: Number of samples in the accumulated batch
        seed: Run seed
        sub_batch: Samples per sub-batch
        event: Pruning event index; each event draws its own sample
    """
    if len(dataset) == 0:
        raise ValueError("cannot draw a criterion batch from an empty dataset")
    if len(dataset) < size:
        logger.warning(f"Criterion batch of {size} requested but {dataset.split} set has {len(dataset)} samples; using all")
        size = len(dataset)

    rng = np.random.default_rng([seed] if event is None else [seed, event])
    chosen = np.sort(rng.choice(len(dataset), size=size, replace=False))
    return [
        (dataset.images[chosen[start:start + sub_batch]], dataset.labels[chosen[start:start + sub_batch]])
        for start in range(0, size, sub_batch)
    ]
