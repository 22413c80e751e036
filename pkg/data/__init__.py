"""
Data
IDX ingestion, normalisation, synthetic fixtures and batching
"""

from data.datasets import Dataset, normalise, split_validation, synthetic_blobs
from data.idx import IdxFormatError, export_idx, load_idx, load_split, read_idx_images, read_idx_labels, write_idx
from data.batching import BatchIterator, augment, criterion_batch

__all__ = [
    # Datasets
    'Dataset',
    'normalise',
    'synthetic_blobs',
    'split_validation',

    # IDX files
    'IdxFormatError',
    'load_idx',
    'load_split',
    'read_idx_images',
    'read_idx_labels',
    'write_idx',
    'export_idx',

    # Batching
    'BatchIterator',
    'augment',
    'criterion_batch',
]
