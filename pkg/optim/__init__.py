"""
Optim
Adam updates, gradient clipping, the training loop and weight rewinding
"""

from optim.adam import ArchitectureMismatchError, OptimState, adam_step, clip_gradients, global_norm
from optim.trainer import EpochMetrics, train_epochs
from optim.snapshot import WeightSnapshot, restore_weights, snapshot_weights

__all__ = [
    # Optimiser
    'OptimState',
    'adam_step',
    'clip_gradients',
    'global_norm',
    'ArchitectureMismatchError',

    # Training
    'EpochMetrics',
    'train_epochs',

    # Rewinding
    'WeightSnapshot',
    'snapshot_weights',
    'restore_weights',
]
