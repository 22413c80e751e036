import numpy as np
import pytest

from conftest import make_convnet, make_mlp, randomise_batch_norm
from nn_core.architectures import build_architecture, init_orthogonal, leaky_relu_gain, orthogonal
from nn_core.engine import backward, evaluate, forward, predict
from nn_core.gradcheck import grad_check
from nn_core.layers import (
    AdaptiveAvgPool2d, BatchNorm1d, BatchNorm2d, Conv2d, Dropout, Flatten, LeakyReLU, Linear, MaxPool2d,
)
from nn_core.model import Model
from nn_core.saliency import input_saliency
from nn_core.tensor import GraphError, ShapeError, Tensor


# ==================== Tensor ====================

def test_product_rule_and_broadcast_gradients():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
    b = Tensor(np.array([10.0, 20.0]), requires_grad=True)
    out = (a * b + a).sum()
    out.backward()
    np.testing.assert_allclose(a.grad, [[11.0, 21.0], [11.0, 21.0]])
    np.testing.assert_allclose(b.grad, [4.0, 6.0])


def test_matmul_gradient():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    w = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    (x @ w).sum().backward()
    np.testing.assert_allclose(x.grad, np.ones((3, 2)) @ w.data.T)
    np.testing.assert_allclose(w.grad, x.data.T @ np.ones((3, 2)))


def test_square_of_scalar_product_gradient():
    w = Tensor(np.array([[3.0]]), requires_grad=True)
    x = Tensor(np.array([[2.0]]))
    ((x @ w.T) ** 2).sum().backward()
    assert w.grad[0, 0] == pytest.approx(24.0, abs=1e-12)


def test_backward_needs_graph():
    with pytest.raises(GraphError):
        Tensor(np.ones(3)).backward()
    with pytest.raises(GraphError):
        Tensor(np.ones(3), requires_grad=True).backward()


def test_engine_backward_before_forward(mlp):
    with pytest.raises(GraphError):
        backward(mlp)


# ==================== Gradient checks ====================

def _single_layer_model(layer, input_shape, classes=3):
    layers = [layer]
    if len(input_shape) > 1:
        layers.append(Flatten())
    model = Model(layers, input_shape, classes)
    shape = model.trace_shapes()[-1]
    layers.append(Linear(int(np.prod(shape)), classes))
    model = Model(layers, input_shape, classes)
    return init_orthogonal(model, seed=3)


@pytest.mark.parametrize("layer,input_shape", [
    (Linear(5, 4), (5,)),
    (Conv2d(2, 3, 3, padding=1), (2, 5, 5)),
    (Conv2d(2, 3, 3, stride=2), (2, 7, 7)),
    (BatchNorm1d(5), (5,)),
    (BatchNorm2d(2), (2, 4, 4)),
    (LeakyReLU(), (5,)),
    (MaxPool2d(2, 2), (2, 4, 4)),
    (AdaptiveAvgPool2d((3, 3)), (2, 5, 5)),
    (Dropout(0.3), (5,)),
])
def test_grad_check_per_layer_kind(layer, input_shape):
    model = _single_layer_model(layer, input_shape)
    rng = np.random.default_rng(1)
    images = rng.standard_normal((6,) + input_shape)
    labels = rng.integers(0, 3, 6)
    assert grad_check(model, images, labels) < 1e-4


@pytest.mark.parametrize("mode", ["train", "eval"])
def test_grad_check_composed(mode, image_blobs):
    model = randomise_batch_norm(make_convnet(seed=2), seed=2).set_mode(mode)
    assert grad_check(model, image_blobs.images[:5], image_blobs.labels[:5]) < 1e-4


@pytest.mark.parametrize("seed", range(20))
def test_grad_check_lenet5(seed):
    model = init_orthogonal(build_architecture("LeNet5", (1, 28, 28), 3, width_scale=0.1), seed)
    model = randomise_batch_norm(model, seed).set_mode("train" if seed % 2 else "eval")
    model.reseed(seed)
    rng = np.random.default_rng(seed)
    images = rng.standard_normal((3, 1, 28, 28))
    labels = rng.integers(0, 3, 3)
    assert grad_check(model, images, labels) < 1e-4


def test_masked_weights_get_gradient_at_zero(mlp, batch):
    mlp.layers[0].masks["weight"][0, :3] = 0.0
    mlp.apply_masks()
    loss, _ = forward(mlp, *batch)
    grads = backward(mlp, loss).params
    assert np.all(mlp.parameters()["0.weight"].data[0, :3] == 0.0)
    assert np.any(grads["0.weight"][0, :3] != 0.0)


# ==================== Forward semantics ====================

def _reference_logits(model, x):
    """Eval-mode forward of a Linear/BatchNorm1d/LeakyReLU stack in plain numpy, without gates"""
    out = x
    for layer in model.layers:
        if isinstance(layer, Linear):
            weight = layer.params["weight"].data * layer.masks["weight"]
            out = out @ weight.T + layer.params["bias"].data * layer.masks["bias"]
        elif isinstance(layer, BatchNorm1d):
            inv_std = 1.0 / np.sqrt(layer.running_var + layer.eps)
            out = layer.params["weight"].data * ((out - layer.running_mean) * inv_std) + layer.params["bias"].data
        else:
            out = np.where(out > 0, out, layer.negative_slope * out)
    return out


@pytest.mark.parametrize("seed", range(5))
def test_masking_equals_zeroing(seed, batch):
    zeroed = randomise_batch_norm(make_mlp(seed=seed), seed).eval()
    masked = zeroed.clone()
    rng = np.random.default_rng(seed)
    for name in zeroed.prunable_weights():
        hit = rng.random(zeroed.parameters()[name].shape) < 0.3
        zeroed.parameters()[name].data[hit] = 0.0
        masked.mask_for(name)[hit] = 0.0
    assert forward(zeroed, *batch)[0].scalar == forward(masked, *batch)[0].scalar


def test_unit_gates_are_neutral(blobs):
    model = randomise_batch_norm(make_mlp(seed=4), seed=4).eval()
    assert all(np.all(gate.data == 1.0) for gate in model.gates().values())
    np.testing.assert_array_equal(predict(model, blobs.images), _reference_logits(model, blobs.images))


def test_eval_output_ignores_batch_composition(blobs):
    model = randomise_batch_norm(make_mlp(seed=6), seed=6).eval()
    alone = predict(model, blobs.images[:1])
    rng = np.random.default_rng(0)
    for size in (2, 17, 120):
        others = blobs.images[rng.permutation(len(blobs.images))[:size - 1]]
        mixed = predict(model, np.concatenate([blobs.images[:1], others]))
        np.testing.assert_allclose(mixed[:1], alone, rtol=1e-12, atol=1e-12)
    assert np.all(model.layers[1].running_mean == randomise_batch_norm(make_mlp(seed=6), 6).layers[1].running_mean)


@pytest.mark.parametrize("mode", ["train", "eval"])
def test_zero_weights_give_uniform_loss(mode, blobs):
    model = build_architecture("MLP5", 8, 10, width_scale=0.05).set_mode(mode)
    labels = blobs.labels % 10
    loss, logits = forward(model, blobs.images, labels)
    assert np.all(logits.data == 0.0)
    assert loss.scalar == pytest.approx(np.log(10.0), abs=1e-12)


# ==================== Architectures ====================

@pytest.mark.parametrize("name,dims,scale,gates", [
    ("MLP5", (1, 28, 28), 0.1, 5),
    ("LeNet5", (1, 28, 28), 0.5, 5),
    ("Conv6", (3, 32, 32), 0.25, 9),
])
def test_architectures_build_and_trace(name, dims, scale, gates):
    model = build_architecture(name, dims, 10, width_scale=scale)
    assert len(model.gate_layers()) == gates
    assert model.trace_shapes()[-1] == (10,)
    assert model.hidden_gate_layers() == model.gate_layers()[:-1]


def test_architecture_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_architecture("ResNet", (1, 28, 28), 10)
    with pytest.raises(ValueError):
        build_architecture("LeNet5", 784, 10)
    with pytest.raises(ValueError):
        build_architecture("MLP5", 784, 10, width_scale=0.0)


def test_orthogonal_rows_are_orthonormal():
    q = orthogonal((4, 9), gain=1.0, rng=np.random.default_rng(0))
    np.testing.assert_allclose(q @ q.T, np.eye(4), atol=1e-12)


def test_orthogonal_with_gain():
    gain = leaky_relu_gain()
    q = orthogonal((3, 5), gain=gain, rng=np.random.default_rng(7))
    np.testing.assert_allclose(q @ q.T, gain ** 2 * np.eye(3), rtol=0, atol=1e-10)


def test_init_is_deterministic():
    a, b = make_mlp(seed=5), make_mlp(seed=5)
    for (name, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)


def test_model_rejects_wrong_input_shape(mlp):
    with pytest.raises(ShapeError):
        predict(mlp, np.zeros((2, 7)))


def test_evaluate_restores_mode(mlp, blobs):
    mlp.train()
    loss, acc = evaluate(mlp, blobs.images, blobs.labels, batch_size=16)
    assert mlp.training
    assert loss > 0.0
    assert 0.0 <= acc <= 1.0


def test_parameter_count_effective(mlp):
    total = mlp.parameter_count()
    mlp.layers[0].masks["weight"][:2] = 0.0
    assert mlp.parameter_count(effective=True) == total - 2 * 8


def test_saliency_is_normalised(convnet, image_blobs):
    saliency = input_saliency(convnet, image_blobs.images[0])
    assert saliency.shape == (1, 8, 8)
    assert saliency.min() >= 0.0
    assert saliency.max() == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(3))
def test_saliency_matches_finite_difference(seed, blobs):
    model = randomise_batch_norm(make_mlp(seed=seed), seed).eval()
    sample = blobs.images[seed]
    top = int(predict(model, sample[None]).argmax())
    step = 1e-6
    numeric = np.zeros_like(sample)
    for i in range(sample.size):
        plus, minus = sample.copy(), sample.copy()
        plus[i] += step
        minus[i] -= step
        numeric[i] = (predict(model, plus[None])[0, top] - predict(model, minus[None])[0, top]) / (2 * step)
    expected = np.abs(numeric) / np.abs(numeric).max()
    np.testing.assert_allclose(input_saliency(model, sample), expected, atol=1e-4)


def test_saliency_of_linear_model_is_weight_magnitude():
    model = Model([Linear(4, 3)], (4,), 3)
    model.parameters()["0.weight"].data = np.array([
        [0.5, -2.0, 1.0, 0.0],
        [-1.0, 0.25, 3.0, -0.5],
        [0.1, 0.1, 0.1, 0.1],
    ])
    sample = np.array([1.0, 0.0, 2.0, 1.0])
    top = int(predict(model, sample[None]).argmax())
    row = np.abs(model.parameters()["0.weight"].data[top])
    np.testing.assert_allclose(input_saliency(model, sample), row / row.max(), atol=1e-12)


def test_clone_is_independent(mlp, batch):
    forward(mlp, *batch)
    before = backward(mlp).params["0.weight"].copy()
    twin = mlp.clone()

    np.testing.assert_array_equal(mlp.parameters()["0.weight"].grad, before)
    assert mlp._last_loss is not None
    assert all(param.grad is None for _, param in twin.named_parameters())
    np.testing.assert_array_equal(backward(mlp).params["0.weight"], before)
    with pytest.raises(GraphError):
        backward(twin)

    twin.parameters()["0.weight"].data[...] = 0.0
    assert np.any(mlp.parameters()["0.weight"].data != 0.0)
