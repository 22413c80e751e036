import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from conftest import make_mlp
from prune.ranking import Safeguards, UnreachableSparsityWarning, prune_nodes, prune_union, prune_weights, rank_and_prune
from prune.schedule import PruneTarget
from prune.scores import PRUNED, ScoreMap
from prune.structure import MaskSet


def _random_scores(model, seed=0):
    rng = np.random.default_rng(seed)
    masks = MaskSet.from_model(model)
    return ScoreMap(
        weights={name: rng.random(m.shape) for name, m in masks.weights.items()},
        nodes={idx: rng.random(m.shape) for idx, m in masks.nodes.items()},
    )


@pytest.mark.parametrize("kappa", [0.1, 0.5, 0.73, 0.98])
def test_weight_pruning_hits_exact_count(mlp, kappa):
    masks = MaskSet.from_model(mlp)
    result = prune_weights(_random_scores(mlp), masks, kappa)
    assert result.masks.pruned_weights == int(round(kappa * masks.total_weights))
    assert result.reached
    assert masks.pruned_weights == 0


def test_lowest_scores_go_first_and_ties_break_by_position():
    masks = MaskSet(weights={"0.weight": np.ones((2, 2)), "3.weight": np.ones((1, 2))})
    scores = ScoreMap(weights={"0.weight": np.array([[5.0, 1.0], [1.0, 2.0]]), "3.weight": np.array([[1.0, 0.5]])})
    result = prune_weights(scores, masks, 3 / 6)
    np.testing.assert_array_equal(result.masks.weights["0.weight"], [[1, 0], [0, 1]])
    np.testing.assert_array_equal(result.masks.weights["3.weight"], [[0, 1]])
    assert result.pruned_weights == {"0.weight": 2, "3.weight": 1}


def test_masked_entries_stay_masked_and_are_not_recounted():
    masks = MaskSet(weights={"0.weight": np.array([0.0, 1.0, 1.0, 1.0])})
    scores = ScoreMap(weights={"0.weight": np.array([PRUNED, 3.0, 1.0, 2.0])})
    result = prune_weights(scores, masks, 0.5)
    np.testing.assert_array_equal(result.masks.weights["0.weight"], [0, 1, 0, 1])


def test_sparsity_never_decreases(mlp):
    first = prune_weights(_random_scores(mlp), MaskSet.from_model(mlp), 0.6)
    with pytest.raises(ValueError, match="never shrink"):
        prune_weights(_random_scores(mlp, 1), first.masks, 0.3)
    again = prune_weights(_random_scores(mlp, 1), first.masks, 0.6)
    assert again.masks.pruned_weights == first.masks.pruned_weights


SCALES = st.one_of(
    st.integers(min_value=-20, max_value=20).map(lambda e: 2.0 ** e),
    st.sampled_from([3.0, 0.1, 7.0, 1 / 3, 1e-6, 12345.678]),
    st.floats(min_value=1e-3, max_value=1e3),
)


@hypothesis_settings(max_examples=40, deadline=None)
@given(factor=SCALES, seed=st.integers(min_value=0, max_value=1000))
def test_masks_invariant_under_positive_scaling(factor, seed):
    model = make_mlp(seed=1)
    scores = _random_scores(model, seed)
    masks = MaskSet.from_model(model)
    a = prune_weights(scores, masks, 0.7)
    b = prune_weights(scores.scaled(factor), masks, 0.7)
    for name in a.masks.weights:
        np.testing.assert_array_equal(a.masks.weights[name], b.masks.weights[name])


@hypothesis_settings(max_examples=60, deadline=None)
@given(
    steps=st.lists(st.integers(min_value=1, max_value=30), min_size=4, max_size=24),
    nudges=st.lists(st.booleans(), min_size=24, max_size=24),
    factor=SCALES,
)
def test_last_bit_ties_survive_rescaling(steps, nudges, factor):
    # neighbours one ulp apart may collapse to equal floats once rescaled
    values = np.array([s / 7 for s in steps])
    values = np.where(nudges[:len(values)], np.nextafter(values, np.inf), values)
    masks = MaskSet(weights={"0.weight": np.ones(len(values))})
    a = prune_weights(ScoreMap(weights={"0.weight": values}), masks, 0.5)
    b = prune_weights(ScoreMap(weights={"0.weight": values * factor}), masks, 0.5)
    np.testing.assert_array_equal(a.masks.weights["0.weight"], b.masks.weights["0.weight"])


def test_one_ulp_apart_scores_break_ties_by_position():
    low = 1 / 3
    values = np.array([np.nextafter(low, np.inf), low, 2.0, low])
    masks = MaskSet(weights={"0.weight": np.ones(4)})
    result = prune_weights(ScoreMap(weights={"0.weight": values}), masks, 0.5)
    np.testing.assert_array_equal(result.masks.weights["0.weight"], [0, 0, 1, 1])


def test_weight_shortfall_warns():
    masks = MaskSet(weights={"0.weight": np.ones(4)})
    scores = ScoreMap(weights={"0.weight": np.array([PRUNED, PRUNED, PRUNED, 1.0])})
    with pytest.warns(UnreachableSparsityWarning):
        result = prune_weights(scores, masks, 0.75)
    assert result.masks.pruned_weights == 1 and not result.reached


def test_node_pruning_skips_output_layer_and_masks_owned_weights(mlp):
    masks = MaskSet.from_model(mlp)
    scores = _random_scores(mlp)
    result = prune_nodes(scores, masks, 5 / 11)
    hidden = [0, 3]
    assert sum(result.pruned_nodes.values()) == 5
    assert 6 not in result.pruned_nodes
    assert np.all(result.masks.nodes[6] == 1)
    for idx in hidden:
        for node in np.flatnonzero(result.masks.nodes[idx] == 0):
            assert np.all(result.masks.weights[f"{idx}.weight"][node] == 0)
            assert result.masks.biases[f"{idx}.bias"][node] == 0
    assert result.achieved == pytest.approx(5 / 11)


def test_node_safeguard_keeps_min_nodes(mlp):
    masks = MaskSet.from_model(mlp)
    with pytest.warns(UnreachableSparsityWarning):
        result = prune_nodes(_random_scores(mlp), masks, 0.99, Safeguards(min_nodes=2))
    assert all(np.count_nonzero(result.masks.nodes[idx]) == 2 for idx in (0, 3))
    assert not result.reached


def test_union_counts_node_weights_towards_target(mlp):
    masks = MaskSet.from_model(mlp)
    scores = _random_scores(mlp)
    scores.nodes[0][:] = 10.0
    scores.nodes[3][:] = 10.0
    scores.nodes[0][2] = -1.0
    result = prune_union(scores, masks, 0.3)
    assert result.masks.pruned_weights == int(round(0.3 * masks.total_weights))
    assert result.masks.nodes[0][2] == 0
    assert np.all(result.masks.weights["0.weight"][2] == 0)
    assert np.all(result.masks.weights["3.weight"][:, 2] == 0)


def test_rank_and_prune_dispatches(mlp):
    masks = MaskSet.from_model(mlp)
    scores = _random_scores(mlp)
    nodes = rank_and_prune(scores, masks, 0.4, target="nodes")
    assert sum(nodes.pruned_nodes.values()) == int(round(0.4 * 11))
    weights = rank_and_prune(scores, masks, 0.4, target=PruneTarget.WEIGHTS)
    assert not weights.pruned_nodes
