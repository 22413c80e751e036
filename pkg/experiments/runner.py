"""
Experiment Runner
Seeded end-to-end runs: build, prune, train, evaluate and write result files
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import settings
from data.batching import criterion_batch
from data.datasets import Dataset, split_validation, synthetic_blobs
from data.idx import load_split
from experiments.checkpoint import save_checkpoint
from experiments.storage import ResultStore
from metrics.cost import csr_storage_estimate, flops_estimate, reduction, weight_masks
from metrics.sparsity import sparsity
from metrics.statistics import confidence_bound, harmonic_mean
from nn_core.architectures import build_architecture, init_orthogonal
from nn_core.engine import evaluate
from nn_core.model import Model
from optim.adam import OptimState
from optim.trainer import EpochMetrics, train_epochs
from prune.baselines import imp_global, random_prune
from prune.connectivity import connectivity_check
from prune.drivers import PruneEventLog, PruneOutcome, cnip_it, record_event, snap_it, snip, snip_it
from prune.ranking import Safeguards
from prune.schedule import PruneTarget
from prune.scores import criterion_loss
from run_models import CostSummary, Method, RunConfig, RunManifest, RunSummary, SeedResult
from utils.run_id import generate_run_id

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "train_loss", "train_acc", "test_acc"]


@dataclass
class RunData:
    train: Dataset
    test: Dataset
    validation: Optional[Dataset] = None


def load_data(config: RunConfig, seed: int) -> RunData:
    """
    Training and test sets for one seed, plus the optional held-out validation split.

    Synthetic data is generated once from `data.synthetic_seed` and split
    into train/test, so every seed sees the same samples.
    """
    data = config.data
    if data.source == "mnist":
        train = load_split(data.directory, "train", data.num_classes)
        test = load_split(data.directory, "test", data.num_classes)
    else:
        full = synthetic_blobs(data.num_classes, data.synthetic_per_class, data.synthetic_dims,
                               seed=data.synthetic_seed, separation=data.synthetic_separation)
        train, test = split_validation(full, data.synthetic_test_fraction, data.synthetic_seed)
        test = replace(test, split="test")

    validation = None
    if data.validation_fraction > 0:
        train, validation = split_validation(train, data.validation_fraction, seed)
    return RunData(train=train, test=test, validation=validation)


def build_model(config: RunConfig, data: RunData, seed: int) -> Model:
    model = build_architecture(config.model.architecture, data.train.sample_shape,
                               data.train.num_classes, config.model.width_scale)
    return init_orthogonal(model, seed)


def optim_state_for(config: RunConfig) -> OptimState:
    o = config.optim
    return OptimState(lr=o.learning_rate, beta1=o.beta1, beta2=o.beta2, eps=o.eps,
                      weight_decay=o.weight_decay, clip_magnitude=o.clip_magnitude)


def run_id_for(config: RunConfig) -> str:
    """Hash of the resolved config; the output directory is not part of the identity"""
    return generate_run_id(config.model_dump(mode="json", exclude={"run": {"output_dir"}}))


def manifest_for(config: RunConfig) -> RunManifest:
    """Resolved configuration plus every behavioural flag the results depend on"""
    return RunManifest(
        run_id=run_id_for(config),
        method=config.method.name.value,
        seeds=list(config.run.seeds),
        config=config.model_dump(mode="json"),
        flags={
            "criterion": "elasticity |g*theta|/L, eval mode, mean loss over criterion batch",
            "criterion_batch": "resampled per event from seed (run seed, event index)",
            "masked_gradients": "gradient at effective zero; updates and moments suppressed",
            "clip": "global L2 norm over unmasked gradient entries",
            "weight_decay": "coupled (added to gradient)",
            "schedule": "s intermediate events then kappa_final; tau epochs before each intermediate event",
            "normalisation": {"mean": settings.MNIST_MEAN, "std": settings.MNIST_STD}
            if config.data.source == "mnist" else "synthetic blobs, unnormalised",
            "flops": {"mac": 2, "train_multiplier": settings.TRAIN_FLOPS_MULTIPLIER,
                      "train_counts": "training steps only; pruning-phase epochs at dense cost"},
            "storage": {"float_bits": settings.FLOAT_BITS, "index_bits": settings.INDEX_BITS},
        },
    )


# ==================== Single seed ====================

def _prune(config: RunConfig, model: Model, data: RunData, seed: int,
           optim_state: OptimState) -> Tuple[PruneOutcome, int]:
    """Apply the configured method; returns the outcome and the epochs the pruning phase trained"""
    method = config.method
    common = dict(batch_size=config.optim.batch_size, test_set=data.test)
    train_kwargs = dict(val_set=data.validation, flip_probability=config.data.flip_probability)
    safeguards = Safeguards(min_nodes=method.min_nodes)
    schedule = method.schedule()

    if method.name is Method.SNIP:
        outcome = snip(model, data.train, method.kappa_final, seed,
                       criterion_size=method.criterion_size, **common)
    elif method.name is Method.SNIP_IT:
        outcome = snip_it(model, data.train, schedule, optim_state, seed, safeguards=safeguards,
                          criterion_size=method.criterion_size, **common, **train_kwargs)
    elif method.name is Method.SNAP_IT:
        outcome = snap_it(model, data.train, schedule, seed, safeguards=safeguards,
                          criterion_size=method.criterion_size, **common)
        optim_state.reset()
        outcome.optim_state = optim_state
    elif method.name is Method.CNIP_IT:
        outcome = cnip_it(model, data.train, schedule, optim_state, seed, safeguards=safeguards,
                          criterion_size=method.criterion_size, **common, **train_kwargs)
    elif method.name is Method.IMP_GLOBAL:
        outcome = imp_global(model, data.train, method.kappa_final, optim_state, seed,
                             tau=method.imp_interval, rewind_epoch=method.rewind_epoch, steps=method.steps,
                             criterion_size=method.criterion_size, **common, **train_kwargs)
        return outcome, method.rewind_epoch + len(outcome.log.events) * method.imp_interval
    elif method.name is Method.RANDOM:
        target = method.resolved_target
        batches = criterion_batch(data.train, size=method.criterion_size, seed=seed, event=0)
        loss_before = criterion_loss(model, batches)
        result = random_prune(model, method.kappa_final, seed, target, safeguards)
        log = PruneEventLog(method=method.name.value)
        log.events.append(record_event(0, target, 0, result, loss_before, criterion_loss(model, batches), False))
        outcome = PruneOutcome(model=model, log=log, optim_state=optim_state)
    else:
        outcome = PruneOutcome(model=model, log=PruneEventLog(method=method.name.value), optim_state=optim_state)
    return outcome, outcome.resume_epoch


def history_frame(history: Sequence[EpochMetrics]) -> pd.DataFrame:
    columns = METRIC_COLUMNS + (["val_acc"] if any(row.val_acc is not None for row in history) else [])
    return pd.DataFrame([row.model_dump() for row in history], columns=columns)


def run_seed(config: RunConfig, seed: int, run_dir: Path) -> SeedResult:
    """
    One complete run for `seed`: prune with the configured method, train the
    remaining epoch budget, evaluate and write the per-seed files.
    """
    store = ResultStore(run_dir)
    data = load_data(config, seed)
    model = build_model(config, data, seed)
    dense = model.clone()
    optim_state = optim_state_for(config)
    logger.info(f"[{config.method.name.value}] seed {seed}: {model.name} with {model.parameter_count()} parameters")

    outcome, pruning_epochs = _prune(config, model, data, seed, optim_state)
    model = outcome.model
    remaining = max(0, config.run.epochs - outcome.resume_epoch)
    history = list(outcome.history) + train_epochs(
        model, data.train, remaining, outcome.optim_state, seed,
        batch_size=config.optim.batch_size, start_epoch=outcome.resume_epoch,
        flip_probability=config.data.flip_probability, test_set=data.test, val_set=data.validation,
    )
    test_acc = evaluate(model, data.test.images, data.test.labels, config.optim.batch_size)[1]

    report = sparsity(model, reference=dense)
    dense_flops = flops_estimate(dense)
    flops = flops_estimate(model)
    storage = csr_storage_estimate(weight_masks(model))
    dense_storage = csr_storage_estimate(weight_masks(dense))
    n_train = len(data.train)
    cumulative = (dense_flops.cumulative_train_flops(pruning_epochs, n_train)
                  + flops.cumulative_train_flops(remaining, n_train))
    connected = connectivity_check(model).connected
    if not connected:
        logger.warning(f"[{config.method.name.value}] seed {seed}: network is disconnected")

    store.save_table(f"metrics_seed{seed}.csv", history_frame(history))
    store.save_text(f"events_seed{seed}.jsonl", outcome.log.to_jsonl())
    if config.run.checkpoint:
        save_checkpoint(store.path(f"model_seed{seed}.ckpt"), model,
                        metadata={"method": config.method.name.value, "seed": seed})

    logger.info(
        f"[{config.method.name.value}] seed {seed}: test_acc={test_acc:.4f} "
        f"weight_sparsity={report.weight_sparsity:.4f} node_sparsity={report.node_sparsity:.4f}"
    )
    return SeedResult(
        seed=seed,
        test_acc=test_acc,
        weight_sparsity=report.weight_sparsity,
        node_sparsity=report.node_sparsity,
        connected=connected,
        inference_flops=flops.inference_flops_per_sample,
        train_flops=flops.train_flops_per_sample,
        cumulative_train_flops=cumulative,
        dense_inference_flops=dense_flops.inference_flops_per_sample,
        dense_train_flops=dense_flops.train_flops_per_sample,
        dense_cumulative_train_flops=dense_flops.cumulative_train_flops(config.run.epochs, n_train),
        dense_bits=dense_storage.dense_bits,
        csr_bits=storage.csr_bits,
        epochs_trained=pruning_epochs + remaining,
    )


def _seed_job(config_data: Dict, seed: int, run_dir: str) -> Dict:
    """Process-pool entry point; plain data in and out"""
    return run_seed(RunConfig(**config_data), seed, Path(run_dir)).model_dump()


# ==================== Aggregation ====================

def headline_sparsity(config: RunConfig, weight: float, node: float) -> float:
    """Node sparsity for node-pruning methods, weight sparsity otherwise"""
    if config.method.name is not Method.DENSE and config.method.resolved_target is PruneTarget.NODES:
        return node
    return weight


def summarise(config: RunConfig, results: Sequence[SeedResult]) -> RunSummary:
    """Aggregate per-seed results into percentages with a 95% confidence half-width"""
    accs = np.array([r.test_acc for r in results]) * 100.0
    weight = float(np.mean([r.weight_sparsity for r in results])) * 100.0
    node = float(np.mean([r.node_sparsity for r in results])) * 100.0
    headline = headline_sparsity(config, weight, node)
    acc_mean = float(accs.mean())
    hm = harmonic_mean(acc_mean, headline) if acc_mean + headline > 0 else None

    def mean(key: str) -> float:
        return float(np.mean([getattr(r, key) for r in results]))

    costs = CostSummary(
        inference_flops=mean("inference_flops"),
        train_flops=mean("train_flops"),
        cumulative_train_flops=mean("cumulative_train_flops"),
        csr_bits=mean("csr_bits"),
        inference_flops_reduction=reduction(mean("dense_inference_flops"), mean("inference_flops")),
        train_flops_reduction=reduction(mean("dense_train_flops"), mean("train_flops")),
        cumulative_flops_reduction=reduction(mean("dense_cumulative_train_flops"), mean("cumulative_train_flops")),
        disk_reduction=reduction(mean("dense_bits"), mean("csr_bits")),
        flops_mode="structured" if config.method.name is Method.SNAP_IT else "theoretical",
    )
    connected = sum(r.connected for r in results)
    return RunSummary(
        run_id=run_id_for(config),
        method=config.method.name.value,
        kappa_final=None if config.method.name is Method.DENSE else config.method.kappa_final,
        seeds=[r.seed for r in results],
        acc_mean=acc_mean,
        acc_ci=confidence_bound(accs) if len(accs) > 1 else None,
        weight_sparsity=weight,
        node_sparsity=node,
        headline_sparsity=headline,
        hm=hm,
        connected=connected == len(results),
        connected_seeds=connected,
        costs=costs,
        per_seed=list(results),
    )


# ==================== Experiments ====================

def run_experiments(configs: Sequence[RunConfig], jobs: int = 1) -> List[RunSummary]:
    """
    Execute every (config, seed) pair, in parallel worker processes when
    `jobs` > 1, then write each config's manifest and summary.

    Each pair runs sequentially inside its worker; results are gathered in
    submission order so summaries do not depend on scheduling.
    """
    tasks = []
    for config in configs:
        run_dir = Path(config.run.output_dir) / run_id_for(config)
        store = ResultStore(run_dir)
        store.save_json("manifest.json", manifest_for(config))
        tasks += [(config, seed, run_dir) for seed in config.run.seeds]

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_seed_job, config.model_dump(mode="json"), seed, str(run_dir))
                       for config, seed, run_dir in tasks]
            results = [SeedResult(**future.result()) for future in futures]
    else:
        results = [run_seed(config, seed, run_dir) for config, seed, run_dir in tasks]

    summaries = []
    cursor = 0
    for config in configs:
        n = len(config.run.seeds)
        summary = summarise(config, results[cursor:cursor + n])
        cursor += n
        ResultStore(Path(config.run.output_dir) / summary.run_id).save_json("summary.json", summary)
        logger.info(f"Run {summary.run_id}: acc {summary.acc_mean:.2f}% sparsity {summary.headline_sparsity:.2f}% "
                    f"HM {summary.hm}")
        summaries.append(summary)
    return summaries


def run(config: RunConfig, jobs: int = 1) -> RunSummary:
    return run_experiments([config], jobs)[0]
