import numpy as np
import pytest

from conftest import make_mlp, randomise_batch_norm
from data.datasets import synthetic_blobs
from metrics.histograms import INELASTIC_THRESHOLD, elasticity_histogram
from nn_core.architectures import build_architecture, init_orthogonal
from prune.scores import (
    PRUNED, CriterionGradients, DegenerateLossError, ScoreMap, accumulate_gradients, criterion_loss,
    node_elasticity, union_elasticity, weight_elasticity, weight_scores,
)

STEP = 1e-6
CONFIGURATIONS = 100


def _close(a, b):
    return abs(a - b) <= 1e-5 * max(abs(a), abs(b)) + 1e-8


@pytest.mark.parametrize("seed", range(CONFIGURATIONS))
def test_weight_elasticity_matches_finite_difference(seed, blobs):
    """ε = d log L / d log θ, checked by scaling one weight by (1 ± h)"""
    model = randomise_batch_norm(make_mlp(seed=seed), seed)
    batches = [(blobs.images[:40], blobs.labels[:40]), (blobs.images[40:70], blobs.labels[40:70])]
    scores = weight_elasticity(model, batches)
    base = criterion_loss(model, batches)

    rng = np.random.default_rng(seed)
    for name in model.prunable_weights():
        param = model.parameters()[name]
        pos = tuple(rng.integers(0, s) for s in param.shape)
        original = param.data[pos]
        param.data[pos] = original * (1 + STEP)
        plus = criterion_loss(model, batches)
        param.data[pos] = original * (1 - STEP)
        minus = criterion_loss(model, batches)
        param.data[pos] = original
        numeric = abs((plus - minus) / (2 * STEP)) / base
        assert _close(scores.weights[name][pos], numeric)


@pytest.mark.parametrize("seed", range(CONFIGURATIONS))
def test_node_elasticity_matches_gate_finite_difference(seed, blobs):
    model = randomise_batch_norm(make_mlp(seed=seed), seed)
    batches = [(blobs.images[:50], blobs.labels[:50])]
    scores = node_elasticity(model, batches)
    base = criterion_loss(model, batches)

    for idx in model.gate_layers():
        gate = model.gates()[idx]
        node = seed % gate.size
        gate.data[node] = 1 + STEP
        plus = criterion_loss(model, batches)
        gate.data[node] = 1 - STEP
        minus = criterion_loss(model, batches)
        gate.data[node] = 1.0
        numeric = abs((plus - minus) / (2 * STEP)) / base
        assert _close(scores.nodes[idx][node], numeric)


@pytest.mark.parametrize("seed", range(5))
def test_most_weights_of_fresh_mlp5_are_inelastic(seed):
    model = init_orthogonal(build_architecture("MLP5", (1, 28, 28), 10, width_scale=0.25), seed)
    data = synthetic_blobs(n_classes=10, n_per_class=10, dims=(1, 28, 28), seed=seed)
    histogram = elasticity_histogram(weight_elasticity(model, [(data.images, data.labels)]))
    assert histogram.fraction_inelastic > 0.5
    assert histogram.curve[len(histogram.curve) // 2] < INELASTIC_THRESHOLD


def test_sub_batches_equal_one_concatenated_batch(mlp, blobs):
    whole = accumulate_gradients(mlp, (blobs.images[:60], blobs.labels[:60]))
    parts = accumulate_gradients(mlp, [(blobs.images[:25], blobs.labels[:25]),
                                       (blobs.images[25:60], blobs.labels[25:60])])
    assert parts.loss == pytest.approx(whole.loss, rel=1e-12)
    for name, grad in whole.params.items():
        np.testing.assert_allclose(parts.params[name], grad, rtol=1e-10, atol=1e-14)
    assert parts.samples == 60


def test_scoring_runs_in_eval_mode_and_restores_mode(mlp, batch):
    mlp.train()
    running = mlp.layers[1].running_mean.copy()
    weight_elasticity(mlp, [batch])
    assert mlp.training
    np.testing.assert_array_equal(mlp.layers[1].running_mean, running)


def test_masked_weights_and_pruned_nodes_get_sentinel(mlp, batch):
    mlp.layers[0].masks["weight"][2, 3] = 0.0
    mlp.node_masks[0][1] = 0.0
    scores = union_elasticity(mlp, [batch])
    assert scores.weights["0.weight"][2, 3] == PRUNED
    assert scores.nodes[0][1] == PRUNED
    assert np.all(np.isfinite(scores.finite_weight_scores()))
    assert scores.finite_weight_scores().size == sum(m.size for m in scores.weights.values()) - 1


def test_degenerate_loss(mlp):
    grads = CriterionGradients(
        loss=0.0,
        params={name: np.ones(p.shape) for name, p in mlp.named_parameters()},
        gates={idx: np.ones(g.shape) for idx, g in mlp.gates().items()},
    )
    with pytest.raises(DegenerateLossError):
        weight_scores(mlp, grads)
    fallback = weight_scores(mlp, grads, allow_unnormalised=True)
    assert not fallback.normalised
    np.testing.assert_allclose(fallback.weights["0.weight"], np.abs(mlp.parameters()["0.weight"].data))


def test_scaled_score_map():
    scores = ScoreMap(weights={"0.weight": np.array([1.0, PRUNED])}, nodes={0: np.array([2.0])})
    doubled = scores.scaled(2.0)
    assert doubled.weights["0.weight"][0] == 2.0 and doubled.weights["0.weight"][1] == PRUNED
    assert doubled.nodes[0][0] == 4.0
