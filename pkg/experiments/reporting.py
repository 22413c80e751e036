"""
Reporting
Elasticity histograms of a checkpoint and console rendering of finished runs and sweeps
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Union

import pandas as pd

from data.batching import criterion_batch
from experiments.checkpoint import load_checkpoint
from experiments.runner import load_data
from experiments.storage import ResultStore
from metrics.histograms import INELASTIC_THRESHOLD, elasticity_histogram
from metrics.sparsity import sparsity
from nn_core.architectures import ARCHITECTURES, build_architecture
from nn_core.model import Model
from prune.scores import weight_elasticity
from run_models import RunConfig, RunSummary
from utils.console import print_frame, print_header, print_info, print_table
from utils.run_id import validate_run_id_format

logger = logging.getLogger(__name__)


def dense_reference(model: Model, config: RunConfig) -> Model:
    """Unpruned counterpart of a checkpointed model, from its stored architecture name and width"""
    name = model.name if model.name in ARCHITECTURES else config.model.architecture
    return build_architecture(name, model.input_shape, model.num_classes, model.width_scale)


def report_hist(checkpoint: Union[str, Path], config: RunConfig, out: Union[str, Path],
                seed: int = 0, bins: int = 50) -> Dict[str, float]:
    """
    Write elasticity_curve.csv, elasticity_bins.csv and layer_survival.csv for a checkpoint.

    Elasticities are scored on a criterion batch drawn from the configured
    training set with `seed`, under the checkpoint's current masks. Sparsity
    is measured against the unpruned architecture, so shrunk checkpoints
    count their removed nodes and weights.
    """
    model, metadata = load_checkpoint(checkpoint)
    data = load_data(config, seed)
    batches = criterion_batch(data.train, size=config.method.criterion_size, seed=seed, event=0)
    histogram = elasticity_histogram(weight_elasticity(model, batches, allow_unnormalised=True), bins=bins)
    report = sparsity(model, reference=dense_reference(model, config))

    store = ResultStore(out)
    store.save_table("elasticity_curve.csv", histogram.curve_frame())
    store.save_table("elasticity_bins.csv", histogram.bins_frame())
    store.save_table("layer_survival.csv", report.survival_table())
    stats = {
        "checkpoint": str(checkpoint),
        "method": metadata.get("method"),
        "weights": int(len(histogram.curve)),
        "fraction_below": histogram.fraction_inelastic,
        "threshold": INELASTIC_THRESHOLD,
        "weight_sparsity": report.weight_sparsity,
        "node_sparsity": report.node_sparsity,
    }
    store.save_json("hist_summary.json", stats)
    logger.info(f"{stats['fraction_below']:.2%} of {stats['weights']} surviving weights have elasticity "
                f"below {INELASTIC_THRESHOLD:g}")
    return stats


def _render_summary(summary: RunSummary) -> None:
    print_header(f"{summary.run_id} ({summary.method})")
    rows = [[r.seed, r.test_acc * 100, r.weight_sparsity * 100, r.node_sparsity * 100, r.connected]
            for r in summary.per_seed]
    print_table(["seed", "acc %", "weight sparsity %", "node sparsity %", "connected"], rows)
    ci = f" ± {summary.acc_ci:.2f}" if summary.acc_ci is not None else ""
    print_info(f"accuracy {summary.acc_mean:.2f}%{ci}, sparsity {summary.headline_sparsity:.2f}%, HM {summary.hm}")
    costs = summary.costs
    print_table(
        ["", "inference FLOPS", "train FLOPS", "cumulative FLOPS", "CSR bits"],
        [["pruned", costs.inference_flops, costs.train_flops, costs.cumulative_train_flops, costs.csr_bits],
         ["reduction", costs.inference_flops_reduction, costs.train_flops_reduction,
          costs.cumulative_flops_reduction, costs.disk_reduction]],
        title=f"Costs ({costs.flops_mode})",
    )


def report(directory: Union[str, Path]) -> Optional[str]:
    """
    Render a run directory (summary.json) or sweep directory (sweep.csv).

    Returns:
        "run", "sweep" or None when the directory holds neither
    """
    if not Path(directory).is_dir():
        raise FileNotFoundError(f"No result directory at {directory}")
    store = ResultStore(directory)
    table: Optional[pd.DataFrame] = store.load_table("sweep.csv")
    if table is not None:
        headline = store.load_json("headline.json") or {}
        print_frame(table, title=f"Sweep {Path(directory).name}", highlight=headline.get("row"))
        return "sweep"
    data = store.load_json("summary.json")
    if data is not None:
        summary = RunSummary(**data)
        if not validate_run_id_format(summary.run_id) or summary.run_id != Path(directory).name:
            logger.warning(f"{directory} holds summary {summary.run_id}; the directory may have been renamed")
        _render_summary(summary)
        return "run"
    logger.warning(f"{directory} holds neither summary.json nor sweep.csv")
    return None
