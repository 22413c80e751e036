import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from conftest import make_mlp
from data.datasets import synthetic_blobs, split_validation
from nn_core.architectures import build_architecture, init_orthogonal
from nn_core.engine import backward, evaluate, forward
from nn_core.layers import Linear
from nn_core.model import Model
from nn_core.tensor import GraphError
from optim.adam import ArchitectureMismatchError, OptimState, adam_step, clip_gradients, global_norm
from optim.snapshot import restore_weights, snapshot_weights
from optim.trainer import train_epochs


def _with_gradients(model, batch):
    loss, _ = forward(model, *batch)
    backward(model, loss)
    return model


def test_adam_keeps_masked_entries_and_moments_zero(mlp, batch):
    mlp.layers[0].masks["weight"][1] = 0.0
    mlp.apply_masks()
    state = OptimState(lr=0.05)
    for _ in range(3):
        adam_step(_with_gradients(mlp, batch), state)
    assert np.all(mlp.parameters()["0.weight"].data[1] == 0.0)
    m, v = state.moments("0.weight", (6, 8))
    assert np.all(m[1] == 0.0) and np.all(v[1] == 0.0)
    assert state.step == 3


@pytest.mark.parametrize("weight_decay", [0.0, 5e-5])
def test_single_adam_step_on_scalar(weight_decay):
    model = Model([Linear(1, 1, bias=False)], (1,), 1)
    model.parameters()["0.weight"].data = np.array([[1.0]])
    model.parameters()["0.weight"].grad = np.array([[0.1]])
    state = OptimState(lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=weight_decay)
    adam_step(model, state)

    g = 0.1 + weight_decay * 1.0
    m_hat = (0.1 * g) / (1 - 0.9)
    v_hat = (0.001 * g * g) / (1 - 0.999)
    expected = 1.0 - 1e-3 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert model.parameters()["0.weight"].data[0, 0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.0 - 1e-3, rel=1e-6)


def test_zero_gradient_without_decay_is_a_no_op(mlp):
    before = {name: p.data.copy() for name, p in mlp.named_parameters()}
    state = OptimState(weight_decay=0.0)
    for _ in range(3):
        for _, param in mlp.named_parameters():
            param.grad = np.zeros(param.shape)
        adam_step(mlp, state)
    for name, param in mlp.named_parameters():
        np.testing.assert_array_equal(param.data, before[name], err_msg=name)


def test_adam_requires_gradients(mlp):
    with pytest.raises(GraphError):
        adam_step(mlp, OptimState())


def test_moment_shape_mismatch_raises():
    state = OptimState()
    state.moments("0.weight", (3, 2))
    with pytest.raises(ArchitectureMismatchError):
        state.moments("0.weight", (2, 2))


def test_reset_clears_moments():
    state = OptimState()
    state.moments("0.weight", (3, 2))
    state.step = 7
    state.reset()
    assert state.step == 0 and not state.first_moment


@hypothesis_settings(max_examples=25, deadline=None)
@given(scale=st.floats(min_value=0.1, max_value=100.0), magnitude=st.floats(min_value=0.5, max_value=20.0))
def test_clipping_is_idempotent(scale, magnitude):
    model = make_mlp(seed=1)
    rng = np.random.default_rng(0)
    for _, param in model.named_parameters():
        param.grad = rng.standard_normal(param.shape) * scale
    clip_gradients(model, magnitude)
    once = global_norm(model)
    assert once <= magnitude * (1 + 1e-12)
    clip_gradients(model, magnitude)
    assert global_norm(model) == pytest.approx(once, rel=1e-12)


def test_clip_returns_pre_clip_norm(mlp):
    for _, param in mlp.named_parameters():
        param.grad = np.full(param.shape, 3.0)
    norm = global_norm(mlp)
    assert clip_gradients(mlp, 1.0) == pytest.approx(norm)
    assert global_norm(mlp) == pytest.approx(1.0)


def test_snapshot_restores_weights_but_keeps_masks(mlp, batch):
    snapshot = snapshot_weights(mlp, epoch=0)
    original = mlp.parameters()["0.weight"].data.copy()
    adam_step(_with_gradients(mlp, batch), OptimState(lr=0.1))
    mlp.layers[0].masks["weight"][0] = 0.0
    restore_weights(mlp, snapshot)
    restored = mlp.parameters()["0.weight"].data
    np.testing.assert_array_equal(restored[1:], original[1:])
    assert np.all(restored[0] == 0.0)


def test_restore_rejects_other_architecture(mlp):
    snapshot = snapshot_weights(make_mlp(hidden=(4, 4)), epoch=0)
    with pytest.raises(ArchitectureMismatchError):
        restore_weights(mlp, snapshot)


def test_training_is_deterministic(blobs):
    runs = []
    for _ in range(2):
        model = make_mlp(seed=4)
        history = train_epochs(model, blobs, 2, OptimState(), seed=9, batch_size=32)
        runs.append((model.parameters()["0.weight"].data.copy(), [h.train_loss for h in history]))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_training_learns_separable_blobs():
    data = synthetic_blobs(n_classes=3, n_per_class=60, dims=8, seed=1)
    train, test = split_validation(data, 0.25, seed=0)
    model = init_orthogonal(build_architecture("MLP5", 8, 3, width_scale=0.05), seed=0)
    history = train_epochs(model, train, 12, OptimState(lr=0.01), seed=0, batch_size=32, test_set=test)
    assert [h.epoch for h in history] == list(range(1, 13))
    assert history[-1].train_loss < history[0].train_loss
    assert evaluate(model, test.images, test.labels)[1] >= 0.9


def test_training_rejects_bad_input(mlp, blobs):
    with pytest.raises(ValueError):
        train_epochs(mlp, blobs, -1, OptimState(), seed=0)
    with pytest.raises(ValueError):
        train_epochs(mlp, blobs.subset(np.array([], dtype=int)), 1, OptimState(), seed=0)
