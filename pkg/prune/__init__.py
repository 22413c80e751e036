"""
Prune
Elasticity criteria, the iterative schedule, pruning drivers and baselines

Modules:
- scores: weight and node elasticities over an accumulated criterion batch
- schedule: halving schedule and PruneSchedule
- ranking: global ranking with node safeguards
- structure: node-to-weight mapping, MaskSet and physical shrinking
- drivers: SNIP, SNIP-it, SNAP-it, CNIP-it and the event log
- baselines: random pruning and global IMP
- connectivity: input-to-output reachability report
"""

from prune.scores import (
    DegenerateLossError, ScoreMap, accumulate_gradients, node_elasticity, union_elasticity, weight_elasticity,
)
from prune.schedule import PruneSchedule, PruneTarget, schedule_kappa
from prune.structure import MaskSet, NodeLink, mask_nodes, node_links, shrink_structured
from prune.ranking import PruneResult, Safeguards, UnreachableSparsityWarning, rank_and_prune
from prune.drivers import PruneEvent, PruneEventLog, PruneOutcome, cnip_it, snap_it, snip, snip_it
from prune.baselines import imp_global, magnitude_scores, random_prune
from prune.connectivity import ConnectivityReport, LayerConnectivity, connectivity_check

__all__ = [
    # Criteria
    'ScoreMap',
    'DegenerateLossError',
    'accumulate_gradients',
    'weight_elasticity',
    'node_elasticity',
    'union_elasticity',

    # Schedule and ranking
    'PruneSchedule',
    'PruneTarget',
    'schedule_kappa',
    'Safeguards',
    'PruneResult',
    'UnreachableSparsityWarning',
    'rank_and_prune',

    # Structure
    'MaskSet',
    'NodeLink',
    'node_links',
    'mask_nodes',
    'shrink_structured',

    # Drivers
    'PruneEvent',
    'PruneEventLog',
    'PruneOutcome',
    'snip',
    'snip_it',
    'snap_it',
    'cnip_it',

    # Baselines
    'random_prune',
    'imp_global',
    'magnitude_scores',

    # Connectivity
    'LayerConnectivity',
    'ConnectivityReport',
    'connectivity_check',
]
