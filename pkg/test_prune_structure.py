import numpy as np
import pytest

from conftest import make_convnet, make_mlp, randomise_batch_norm
from nn_core.architectures import build_architecture, init_orthogonal
from nn_core.engine import predict
from prune.structure import MaskSet, mask_nodes, node_links, shrink_structured


def _node_masks(model, pruned):
    masks = {idx: m.copy() for idx, m in model.node_masks.items()}
    for idx, nodes in pruned.items():
        masks[idx][list(nodes)] = 0.0
    return masks


def test_node_links_follow_gate_layers(mlp, convnet):
    links = node_links(mlp)
    assert links[0].outgoing == "3.weight" and links[0].block == 1
    assert links[6].outgoing is None
    conv_links = node_links(convnet)
    assert conv_links[0].outgoing == "4.weight"
    assert conv_links[4].outgoing == "8.weight" and conv_links[4].block == 4


def test_mask_node_zeroes_row_bias_and_columns(mlp):
    masks = MaskSet.from_model(mlp)
    newly = masks.mask_node(0, 2)
    assert newly == 8 + 5
    assert np.all(masks.weights["0.weight"][2] == 0)
    assert masks.biases["0.bias"][2] == 0
    assert np.all(masks.weights["3.weight"][:, 2] == 0)
    assert masks.nodes[0][2] == 0
    assert masks.mask_node(0, 2) == 0


def test_channel_block_is_masked_across_flatten(convnet):
    masks = MaskSet.from_model(convnet)
    masks.mask_node(4, 1)
    np.testing.assert_array_equal(masks.weights["8.weight"][:, 4:8], 0.0)
    assert np.count_nonzero(masks.weights["8.weight"]) == 5 * 12


def test_apply_to_writes_masks_into_model(mlp):
    masks = MaskSet.from_model(mlp)
    masks.mask_node(3, 0)
    masks.apply_to(mlp)
    assert np.all(mlp.parameters()["3.weight"].data[0] == 0.0)
    assert mlp.parameters()["3.bias"].data[0] == 0.0
    assert mlp.node_masks[3][0] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_shrunk_mlp_is_forward_equivalent(seed, blobs):
    model = randomise_batch_norm(make_mlp(seed=seed), seed)
    mask_nodes(model, _node_masks(model, {0: [1, 4], 3: [0]}))
    shrunk = shrink_structured(model)
    assert shrunk.layers[0].params["weight"].shape == (4, 8)
    assert shrunk.layers[3].params["weight"].shape == (4, 4)
    assert shrunk.layers[6].params["weight"].shape == (3, 4)
    model.eval()
    shrunk.eval()
    np.testing.assert_allclose(predict(shrunk, blobs.images), predict(model, blobs.images), atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_shrunk_convnet_is_forward_equivalent(seed, image_blobs):
    model = randomise_batch_norm(make_convnet(seed=seed), seed)
    mask_nodes(model, _node_masks(model, {0: [2], 4: [1, 3], 8: [0]}))
    shrunk = shrink_structured(model)
    assert shrunk.layers[4].params["weight"].shape == (2, 2, 3, 3)
    assert shrunk.layers[8].params["weight"].shape == (4, 8)
    assert shrunk.parameter_count() < model.parameter_count()
    model.eval()
    shrunk.eval()
    np.testing.assert_allclose(predict(shrunk, image_blobs.images), predict(model, image_blobs.images), atol=1e-9)


@pytest.mark.parametrize("name,dims", [("MLP5", (1, 28, 28)), ("Conv6", (3, 32, 32))])
def test_shrunk_architecture_is_forward_equivalent(name, dims):
    model = init_orthogonal(build_architecture(name, dims, 10, width_scale=0.25), seed=1)
    model = randomise_batch_norm(model, seed=1)
    rng = np.random.default_rng(1)
    pruned = {idx: rng.choice(len(m), size=len(m) // 3, replace=False) for idx, m in model.node_masks.items()
              if idx in model.hidden_gate_layers()}
    mask_nodes(model, _node_masks(model, pruned))
    shrunk = shrink_structured(model)
    assert shrunk.parameter_count() < model.parameter_count()

    model.eval()
    shrunk.eval()
    for _ in range(100):
        images = rng.standard_normal((2,) + dims)
        np.testing.assert_allclose(predict(shrunk, images), predict(model, images), rtol=0, atol=1e-9)


def test_shrink_keeps_remaining_weight_masks(mlp):
    mlp.layers[0].masks["weight"][0, 0] = 0.0
    mlp.apply_masks()
    mask_nodes(mlp, _node_masks(mlp, {0: [3]}))
    shrunk = shrink_structured(mlp)
    assert shrunk.layers[0].masks["weight"][0, 0] == 0.0
    # the pruned feature's batch-norm scale and shift carry no mask
    assert shrunk.parameter_count(effective=True) == mlp.parameter_count(effective=True) - 2


def test_shrink_refuses_to_empty_a_layer(mlp):
    with pytest.raises(ValueError, match="every node"):
        shrink_structured(mlp, _node_masks(mlp, {3: range(5)}))
