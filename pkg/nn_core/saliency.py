"""
Input Saliency
Absolute gradient of the top logit with respect to the input pixels
"""

import numpy as np

from nn_core.model import Model
from nn_core.tensor import Tensor


def input_saliency(model: Model, sample: np.ndarray) -> np.ndarray:
    """
    Saliency map of one sample, normalised to [0, 1].

    Args:
        model: Trained or untrained model (evaluated in eval mode)
        sample: One input shaped like model.input_shape (a leading batch axis of 1 is accepted)

    Returns:
        Nonnegative map with the sample's shape; all zeros when the top logit
        does not depend on the input.
    """
    sample = np.asarray(sample, dtype=np.float64)
    batch = sample if sample.shape == (1,) + model.input_shape else sample.reshape((1,) + model.input_shape)

    previous = model.mode
    model.eval()
    x = Tensor(batch, requires_grad=True, name="inputs")
    logits = model.logits(x)
    seed = np.zeros_like(logits.data)
    seed[0, int(logits.data[0].argmax())] = 1.0
    logits.backward(seed)
    model.zero_grad()
    model.set_mode(previous)

    grad = x.grad if x.grad is not None else np.zeros_like(batch)
    saliency = np.abs(grad[0])
    peak = saliency.max()
    return saliency / peak if peak > 0 else np.zeros_like(saliency)
