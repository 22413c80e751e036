"""
Metrics
Sparsity, trade-off statistics, cost estimates and elasticity histograms
"""

from metrics.sparsity import SparsityReport, sparsity
from metrics.statistics import confidence_bound, harmonic_mean
from metrics.cost import (
    FlopsEstimate, LayerFlops, StorageEstimate, csr_storage_estimate, flops_estimate, reduction, weight_masks,
)
from metrics.histograms import ElasticityHistogram, elasticity_histogram

__all__ = [
    # Sparsity
    'SparsityReport',
    'sparsity',

    # Statistics
    'harmonic_mean',
    'confidence_bound',

    # Cost
    'FlopsEstimate',
    'LayerFlops',
    'StorageEstimate',
    'flops_estimate',
    'csr_storage_estimate',
    'weight_masks',
    'reduction',

    # Histograms
    'ElasticityHistogram',
    'elasticity_histogram',
]
