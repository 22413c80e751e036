"""
Sparsity Sweep
Runs one configuration across a list of final sparsities and tabulates the trade-off
"""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import pandas as pd

from experiments.runner import run_experiments, run_id_for
from experiments.storage import ResultStore
from run_models import ConfigError, Method, RunConfig, SweepRow

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["kappa", "acc_mean", "acc_ci", "weight_sparsity", "node_sparsity", "hm"]


def parse_kappas(text: str) -> List[float]:
    """Comma-separated sparsities, e.g. "0.5,0.9,0.98" """
    try:
        kappas = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError([f"--kappa: {e}"]) from e
    if not kappas:
        raise ConfigError(["--kappa: no values given"])
    bad = [k for k in kappas if not 0.0 < k < 1.0]
    if bad:
        raise ConfigError([f"--kappa: values must lie in (0, 1), got {bad}"])
    return sorted(set(kappas))


def headline_row(table: pd.DataFrame) -> int:
    """Index of the row with the highest harmonic mean; the lowest kappa wins ties"""
    if table["hm"].isna().all():
        return 0
    return int(table["hm"].fillna(-1).to_numpy().argmax())


def sweep(config: RunConfig, kappas: Sequence[float], jobs: int = 1) -> Tuple[pd.DataFrame, int, Path]:
    """
    Run `config` once per kappa (all seeds each) and write sweep.csv.

    Returns:
        (table sorted ascending by kappa, headline row index, sweep directory)
    """
    if config.method.name is Method.DENSE:
        raise ConfigError(["method.name: a sweep needs a pruning method, got dense"])
    configs = [config.with_overrides(**{"method.kappa_final": kappa}) for kappa in sorted(kappas)]
    summaries = run_experiments(configs, jobs)

    rows = [
        SweepRow(kappa=s.kappa_final, acc_mean=s.acc_mean, acc_ci=s.acc_ci,
                 weight_sparsity=s.weight_sparsity, node_sparsity=s.node_sparsity, hm=s.hm).model_dump()
        for s in summaries
    ]
    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS).sort_values("kappa", kind="stable").reset_index(drop=True)
    best = headline_row(table)

    sweep_dir = Path(config.run.output_dir) / f"sweep_{run_id_for(config)[4:]}"
    store = ResultStore(sweep_dir)
    store.save_table("sweep.csv", table)
    headline = json.loads(table.iloc[[best]].to_json(orient="records"))[0]
    store.save_json("headline.json", {"row": best, **headline, "runs": [s.run_id for s in summaries]})
    logger.info(f"Sweep over {len(kappas)} sparsities written to {sweep_dir}; headline kappa "
                f"{table.loc[best, 'kappa']} with HM {table.loc[best, 'hm']}")
    return table, best, sweep_dir
