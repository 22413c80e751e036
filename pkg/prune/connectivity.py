"""
Connectivity
Forward and backward reachability of surviving nodes through the masked weights
"""

import logging
from typing import List

import numpy as np
from pydantic import BaseModel

from nn_core.layers import Flatten
from nn_core.model import Model

logger = logging.getLogger(__name__)


class LayerConnectivity(BaseModel):
    layer: int
    nodes: int
    reachable: int
    alive: int


class ConnectivityReport(BaseModel):
    """Per gate-bearing layer: total nodes, forward-reachable nodes and alive nodes"""
    layers: List[LayerConnectivity]
    connected: bool


def adjacency(model: Model) -> List[np.ndarray]:
    """
    Node-level adjacency (out x in) of every gate-bearing layer.

    Conv kernels collapse to one edge per channel pair; after a Flatten each
    input channel owns a block of columns of the following Linear.
    """
    shapes = model.trace_shapes()
    gate_layers = model.gate_layers()
    matrices = []
    for pos, idx in enumerate(gate_layers):
        mask = model.mask_for(f"{idx}.weight")
        edges = mask.reshape(mask.shape[0], mask.shape[1], -1).any(axis=2) if mask.ndim == 4 else mask > 0
        start = gate_layers[pos - 1] + 1 if pos > 0 else 0
        for between in range(start, idx):
            if pos > 0 and isinstance(model.layers[between], Flatten):
                block = int(np.prod(shapes[between - 1][1:]))
                edges = edges.reshape(edges.shape[0], -1, block).any(axis=2)
        matrices.append(edges)
    return matrices


def connectivity_check(model: Model) -> ConnectivityReport:
    """
    Report which nodes lie on an input-to-output path of unmasked weights.

    A node is reachable when some unmasked incoming weight connects it to a
    reachable node of the previous layer (all inputs are reachable), and alive
    when it is reachable and also reaches the output. The network is
    disconnected when any layer has no alive node.
    """
    matrices = adjacency(model)
    forward: List[np.ndarray] = []
    reach = np.ones(matrices[0].shape[1], dtype=bool)
    for edges in matrices:
        reach = edges[:, reach].any(axis=1)
        forward.append(reach)

    backward: List[np.ndarray] = [None] * len(matrices)
    co_reach = np.ones(matrices[-1].shape[0], dtype=bool)
    backward[-1] = co_reach
    for pos in range(len(matrices) - 1, 0, -1):
        co_reach = matrices[pos][co_reach].any(axis=0)
        backward[pos - 1] = co_reach

    rows = []
    for pos, idx in enumerate(model.gate_layers()):
        alive = forward[pos] & backward[pos]
        rows.append(LayerConnectivity(layer=idx, nodes=len(alive),
                                      reachable=int(forward[pos].sum()), alive=int(alive.sum())))
    connected = all(row.alive > 0 for row in rows)
    if not connected:
        dead = [row.layer for row in rows if row.alive == 0]
        logger.warning(f"Network disconnected at layer(s) {dead}")
    return ConnectivityReport(layers=rows, connected=connected)

