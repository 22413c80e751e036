"""
Functional Operations
Differentiable layer primitives built on Tensor closures
"""

from typing import Optional, Tuple

import numpy as np

from nn_core.tensor import ShapeError, Tensor


# ==================== Parameter masking ====================

def masked(param: Tensor, mask: Optional[np.ndarray]) -> Tensor:
    """
    Effective parameter value param ⊙ mask.

    The gradient is passed to `param` unmasked: a pruned entry receives the
    loss gradient at its effective (zero) value, and the optimiser is the one
    that keeps it from being updated.
    """
    if mask is None:
        return param
    out = Tensor(param.data * mask, param.requires_grad, _children=(param,), _op="masked")

    def _backward():
        param.accumulate(out.grad)
    out._backward = _backward
    return out


# ==================== Dense and convolutional ====================

def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor]) -> Tensor:
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear expects (N, {weight.shape[1]}) input, got {x.shape}")
    out = x @ weight.T
    return out + bias if bias is not None else out


def conv_output_size(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation computed as one tensordot per kernel offset, so the
    working set stays at the size of the input rather than an im2col buffer.
    """
    if x.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d expects (N, {weight.shape[1]}, H, W) input, got {x.shape}")

    n, _, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    h_out = conv_output_size(h, kh, stride, padding)
    w_out = conv_output_size(w, kw, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv2d kernel {kh}x{kw} does not fit input {h}x{w}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data

    def window(i: int, j: int) -> Tuple[slice, slice, slice, slice]:
        return (slice(None), slice(None),
                slice(i, i + stride * (h_out - 1) + 1, stride),
                slice(j, j + stride * (w_out - 1) + 1, stride))

    acc = np.zeros((c_out, n, h_out, w_out))
    for i in range(kh):
        for j in range(kw):
            acc += np.tensordot(weight.data[:, :, i, j], xp[window(i, j)], axes=([1], [1]))
    data = acc.transpose(1, 0, 2, 3)
    if bias is not None:
        data = data + bias.data.reshape(1, -1, 1, 1)

    children = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor(np.ascontiguousarray(data), any(t.requires_grad for t in children),
                 _children=children, _op="conv2d")

    def _backward():
        g = out.grad.transpose(1, 0, 2, 3)
        if weight.requires_grad:
            gw = np.zeros_like(weight.data)
            for i in range(kh):
                for j in range(kw):
                    gw[:, :, i, j] = np.tensordot(g, xp[window(i, j)], axes=([1, 2, 3], [0, 2, 3]))
            weight.accumulate(gw)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.tensordot(weight.data[:, :, i, j], g, axes=([0], [0]))
                    gxp[window(i, j)] += contrib.transpose(1, 0, 2, 3)
            x.accumulate(gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp)
        if bias is not None:
            bias.accumulate(out.grad.sum(axis=(0, 2, 3)))
    out._backward = _backward
    return out


# ==================== Pooling ====================

def max_pool2d(x: Tensor, kernel: int, stride: int) -> Tensor:
    n, c, h, w = x.shape
    h_out = (h - kernel) // stride + 1
    w_out = (w - kernel) // stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"max_pool2d kernel {kernel} does not fit input {h}x{w}")

    offsets = [(i, j) for i in range(kernel) for j in range(kernel)]
    windows = [
        (slice(None), slice(None),
         slice(i, i + stride * (h_out - 1) + 1, stride),
         slice(j, j + stride * (w_out - 1) + 1, stride))
        for i, j in offsets
    ]
    stacked = np.stack([x.data[win] for win in windows])
    # First maximum wins on ties
    argmax = stacked.argmax(axis=0)
    data = np.take_along_axis(stacked, argmax[None], axis=0)[0]
    out = Tensor(data, x.requires_grad, _children=(x,), _op="max_pool2d")

    def _backward():
        gx = np.zeros_like(x.data)
        for k, win in enumerate(windows):
            gx[win] += np.where(argmax == k, out.grad, 0.0)
        x.accumulate(gx)
    out._backward = _backward
    return out


def adaptive_bins(extent: int, bins: int):
    """Integer partition of [0, extent) into `bins` windows with floor/ceil bounds"""
    return [((k * extent) // bins, -((-(k + 1) * extent) // bins)) for k in range(bins)]


def adaptive_avg_pool2d(x: Tensor, output_size: Tuple[int, int]) -> Tensor:
    n, c, h, w = x.shape
    rows = adaptive_bins(h, output_size[0])
    cols = adaptive_bins(w, output_size[1])
    data = np.empty((n, c, len(rows), len(cols)))
    for a, (h0, h1) in enumerate(rows):
        for b, (w0, w1) in enumerate(cols):
            data[:, :, a, b] = x.data[:, :, h0:h1, w0:w1].mean(axis=(2, 3))
    out = Tensor(data, x.requires_grad, _children=(x,), _op="adaptive_avg_pool2d")

    def _backward():
        gx = np.zeros_like(x.data)
        for a, (h0, h1) in enumerate(rows):
            for b, (w0, w1) in enumerate(cols):
                area = (h1 - h0) * (w1 - w0)
                gx[:, :, h0:h1, w0:w1] += out.grad[:, :, a, b][:, :, None, None] / area
        x.accumulate(gx)
    out._backward = _backward
    return out


# ==================== Normalisation ====================

def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float,
    eps: float,
) -> Tensor:
    """
    Batch normalisation over every axis except the channel axis (1).

    In training mode the running statistics are updated in place with the
    unbiased batch variance; in eval mode only they are used.
    """
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    view = (1, -1) if x.ndim == 2 else (1, -1, 1, 1)
    count = x.data.size // x.shape[1]

    if training:
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        unbiased = var * count / (count - 1) if count > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mean, var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean.reshape(view)) * inv_std.reshape(view)
    data = gamma.data.reshape(view) * x_hat + beta.data.reshape(view)
    out = Tensor(data, x.requires_grad or gamma.requires_grad or beta.requires_grad,
                 _children=(x, gamma, beta), _op="batch_norm")

    def _backward():
        g = out.grad
        gamma.accumulate((g * x_hat).sum(axis=axes))
        beta.accumulate(g.sum(axis=axes))
        if not x.requires_grad:
            return
        g_hat = g * gamma.data.reshape(view)
        if training:
            sum_g = g_hat.sum(axis=axes).reshape(view)
            sum_gx = (g_hat * x_hat).sum(axis=axes).reshape(view)
            gx = (inv_std.reshape(view) / count) * (count * g_hat - sum_g - x_hat * sum_gx)
        else:
            gx = g_hat * inv_std.reshape(view)
        x.accumulate(gx)
    out._backward = _backward
    return out


# ==================== Activations and regularisation ====================

def leaky_relu(x: Tensor, slope: float) -> Tensor:
    positive = x.data > 0
    out = Tensor(np.where(positive, x.data, slope * x.data), x.requires_grad,
                 _children=(x,), _op="leaky_relu")

    def _backward():
        x.accumulate(out.grad * np.where(positive, 1.0, slope))
    out._backward = _backward
    return out


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-p) at train time"""
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    out = Tensor(x.data * keep, x.requires_grad, _children=(x,), _op="dropout")

    def _backward():
        x.accumulate(out.grad * keep)
    out._backward = _backward
    return out


def flatten(x: Tensor) -> Tensor:
    return x.reshape(x.shape[0], -1)


# ==================== Loss ====================

def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tuple[Tensor, np.ndarray]:
    """
    Mean softmax cross-entropy.

    Returns:
        (scalar loss tensor, per-sample losses)
    """
    if logits.ndim != 2:
        raise ShapeError(f"logits must be (N, K), got {logits.shape}")
    targets = np.asarray(targets, dtype=np.int64)
    n, k = logits.shape
    if targets.shape != (n,):
        raise ShapeError(f"targets shape {targets.shape} does not match batch of {n}")
    if targets.size and (targets.min() < 0 or targets.max() >= k):
        raise ShapeError(f"targets must lie in [0, {k})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    per_sample = log_norm - shifted[np.arange(n), targets]
    out = Tensor(np.array(per_sample.mean()), logits.requires_grad, _children=(logits,), _op="cross_entropy")

    def _backward():
        probs = np.exp(shifted - log_norm[:, None])
        probs[np.arange(n), targets] -= 1.0
        logits.accumulate(probs * (out.grad / n))
    out._backward = _backward
    return out, per_sample
