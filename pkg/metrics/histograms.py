"""
Elasticity Histograms
Sorted elasticity curve and logarithmic bin counts
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from prune.scores import ScoreMap

INELASTIC_THRESHOLD = 1e-2


@dataclass
class ElasticityHistogram:
    curve: np.ndarray
    bin_low: np.ndarray
    bin_high: np.ndarray
    counts: np.ndarray
    fraction_inelastic: float

    def curve_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"rank": np.arange(len(self.curve)), "score": self.curve})

    def bins_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_low": self.bin_low, "bin_high": self.bin_high, "count": self.counts})


def elasticity_histogram(scores, bins: int = 50, threshold: float = INELASTIC_THRESHOLD) -> ElasticityHistogram:
    """
    Descending score curve, log-spaced bin counts and the fraction of scores below `threshold`.

    Pruned positions (non-finite sentinels) are left out. Exact zeros cannot
    sit on a log axis and are counted in a leading [0, lowest edge) bin.

    Args:
        scores: ScoreMap (weight scores, or node scores when it holds none) or an array of scores
        bins: Number of logarithmic bins
        threshold: Bound below which a score counts as inelastic
    """
    if isinstance(scores, ScoreMap):
        values = scores.finite_weight_scores() if scores.weights else scores.finite_node_scores()
    else:
        values = np.asarray(scores, dtype=np.float64).reshape(-1)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise ValueError("no finite scores to histogram")
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")

    curve = np.sort(values)[::-1]
    positive = values[values > 0]
    if positive.size:
        lo, hi = np.log10(positive.min()), np.log10(positive.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        edges = np.logspace(lo, hi, bins + 1)
        counts, edges = np.histogram(positive, bins=edges)
        low, high = edges[:-1], edges[1:]
    else:
        low, high, counts = np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)

    zeros = int(values.size - positive.size)
    if zeros:
        first = low[0] if low.size else 0.0
        low = np.concatenate([[0.0], low])
        high = np.concatenate([[first], high])
        counts = np.concatenate([[zeros], counts])

    return ElasticityHistogram(
        curve=curve,
        bin_low=low,
        bin_high=high,
        counts=counts.astype(np.int64),
        fraction_inelastic=float(np.mean(values < threshold)),
    )
