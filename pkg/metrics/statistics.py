"""
Trade-off Statistics
Harmonic mean of accuracy and sparsity, and the 95% confidence half-width
"""

import math
from typing import Sequence, Union

import numpy as np


def harmonic_mean(accuracy: float, sparsity: float, rounded: bool = True) -> Union[int, float]:
    """
    2as / (a + s) of two percentages, rounded half-up to an integer by default.

    Raises:
        ValueError: a + s == 0 or a value outside [0, 100]
    """
    for label, value in (("accuracy", accuracy), ("sparsity", sparsity)):
        if not 0.0 <= value <= 100.0:
            raise ValueError(f"{label} must be a percentage in [0, 100], got {value}")
    if accuracy + sparsity == 0:
        raise ValueError("harmonic mean is undefined when accuracy + sparsity == 0")
    value = 2.0 * accuracy * sparsity / (accuracy + sparsity)
    return int(math.floor(value + 0.5)) if rounded else value


def confidence_bound(values: Sequence[float]) -> float:
    """1.96 * σ / √n with σ the sample standard deviation"""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError(f"confidence_bound needs at least two values, got {values.size}")
    return float(1.96 * values.std(ddof=1) / np.sqrt(values.size))
