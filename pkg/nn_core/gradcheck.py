"""
Gradient Check
Central finite differences against the analytic reverse pass
"""

import logging
from contextlib import contextmanager
from typing import Callable, Iterator

import numpy as np

from nn_core.engine import backward, forward
from nn_core.layers import Dropout
from nn_core.model import Model

logger = logging.getLogger(__name__)

MAX_CHECKED_PARAMETERS = 10_000
RELATIVE_FLOOR = 1e-6


@contextmanager
def frozen_state(model: Model) -> Iterator[Callable[[], None]]:
    """
    Replay the same dropout draws and batch-norm statistics on every forward
    inside the block, and restore them afterwards.
    """
    rng_states = {idx: layer.rng.bit_generator.state
                  for idx, layer in enumerate(model.layers) if isinstance(layer, Dropout)}
    buffers = {(idx, name): buf.copy()
               for idx, layer in enumerate(model.layers)
               for name, buf in layer.buffers().items()}

    def reset():
        for idx, state in rng_states.items():
            model.layers[idx].rng.bit_generator.state = state
        for (idx, name), saved in buffers.items():
            np.copyto(model.layers[idx].buffers()[name], saved)

    try:
        yield reset
    finally:
        reset()


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), RELATIVE_FLOOR)


def grad_check(model: Model, images: np.ndarray, labels: np.ndarray, step: float = 1e-5) -> float:
    """
    Compare analytic parameter gradients with central differences.

    Every unmasked parameter entry is perturbed by ±step. The model's current
    mode is kept; dropout draws and batch-norm statistics are replayed so the
    loss is a deterministic function of the parameters.

    Returns:
        Worst relative error over all checked entries
    """
    count = model.parameter_count(effective=True)
    if count >= MAX_CHECKED_PARAMETERS:
        raise ValueError(f"grad_check is limited to models under {MAX_CHECKED_PARAMETERS} parameters, got {count}")

    worst = 0.0
    with frozen_state(model) as reset:
        reset()
        loss, _ = forward(model, images, labels)
        grads = backward(model, loss).params

        for name, param in model.named_parameters():
            mask = model.mask_for(name)
            analytic = grads[name]
            param.data = np.ascontiguousarray(param.data)
            flat = param.data.reshape(-1)
            for pos in range(flat.size):
                if mask is not None and mask.reshape(-1)[pos] == 0:
                    continue
                original = flat[pos]
                flat[pos] = original + step
                reset()
                plus = forward(model, images, labels)[0].scalar
                flat[pos] = original - step
                reset()
                minus = forward(model, images, labels)[0].scalar
                flat[pos] = original
                numeric = (plus - minus) / (2.0 * step)
                worst = max(worst, relative_error(float(analytic.reshape(-1)[pos]), numeric))
    model.zero_grad()
    logger.debug(f"grad_check on {count} entries: worst relative error {worst:.3e}")
    return worst
