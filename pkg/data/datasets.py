"""
Datasets
In-memory image datasets, normalisation and synthetic fixtures
"""

import logging
from dataclasses import dataclass, replace
from typing import Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    Images (N x C x H x W, or N x D for flat data) with integer labels.

    `normalised` guards against applying the mean/std transform twice.
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"
    mean: float = 0.0
    std: float = 1.0
    normalised: bool = False

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return tuple(self.images.shape[1:])

    def subset(self, indices: np.ndarray, split: str = None) -> "Dataset":
        return replace(self, images=self.images[indices], labels=self.labels[indices], split=split or self.split)


def normalise(dataset: Dataset, mean: float, std: float) -> Dataset:
    """
    Apply (x - mean) / std exactly once.

    A dataset already flagged as normalised is returned unchanged.
    """
    if dataset.normalised:
        logger.debug(f"{dataset.split} set already normalised; skipping")
        return dataset
    if std <= 0:
        raise ValueError(f"std must be positive, got {std}")
    images = (dataset.images - mean) / std
    return replace(dataset, images=images, mean=mean, std=std, normalised=True)


def synthetic_blobs(
    n_classes: int,
    n_per_class: int,
    dims: Union[int, Sequence[int]],
    seed: int,
    separation: float = 10.0,
    split: str = "train",
) -> Dataset:
    """
    Gaussian class blobs with unit noise.

    Class centres are `separation` apart from the origin along mutually
    orthogonal random directions (when dims allow), so the classes are
    linearly separable for large separations.

    Args:
        n_classes: Number of classes
        n_per_class: Samples per class (must be positive)
        dims: Sample shape, e.g. 20 or (1, 28, 28)
        seed: Generator seed; identical seeds give identical bytes
        separation: Distance of each centre from the origin, in noise σ
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be positive, got {n_per_class}")
    if n_classes < 2:
        raise ValueError(f"need at least two classes, got {n_classes}")
    shape = (dims,) if isinstance(dims, int) else tuple(dims)
    width = int(np.prod(shape))

    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((width, n_classes))
    if n_classes <= width:
        directions, _ = np.linalg.qr(directions)
    else:
        directions /= np.linalg.norm(directions, axis=0, keepdims=True)
    centres = separation * directions.T

    labels = np.repeat(np.arange(n_classes), n_per_class)
    noise = rng.standard_normal((len(labels), width))
    images = (centres[labels] + noise).reshape((len(labels),) + shape)
    order = rng.permutation(len(labels))
    return Dataset(images=images[order], labels=labels[order].astype(np.int64), num_classes=n_classes,
                   split=split, normalised=True)


def split_validation(dataset: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Hold out a random `fraction` of a training set for validation"""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"validation fraction must lie in (0, 1), got {fraction}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    cut = int(round(len(dataset) * fraction))
    return dataset.subset(np.sort(order[cut:]), "train"), dataset.subset(np.sort(order[:cut]), "validation")
