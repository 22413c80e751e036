"""
Experiments
Seeded runs, sparsity sweeps, checkpoints and result files behind the CLI
"""

from experiments.storage import ResultStore, atomic_write, canonical_json
from experiments.checkpoint import CheckpointError, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from experiments.runner import RunData, load_data, manifest_for, run, run_experiments, run_id_for, run_seed, summarise
from experiments.sweep import headline_row, parse_kappas, sweep
from experiments.reporting import report, report_hist

__all__ = [
    # Storage
    'ResultStore',
    'atomic_write',
    'canonical_json',

    # Checkpoints
    'CheckpointError',
    'encode_checkpoint',
    'decode_checkpoint',
    'save_checkpoint',
    'load_checkpoint',

    # Runs
    'RunData',
    'load_data',
    'manifest_for',
    'run_id_for',
    'run_seed',
    'run_experiments',
    'run',
    'summarise',

    # Sweeps and reports
    'parse_kappas',
    'headline_row',
    'sweep',
    'report',
    'report_hist',
]
