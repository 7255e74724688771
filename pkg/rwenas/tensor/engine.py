"""
Execute a ``NetGraph`` forward on a batch of images.
"""

import logging
from typing import Dict, List

import numpy as np

from ..errors import NonFiniteError, ShapeError
from ..netgraph import NetGraph
from . import kernels
from .kernels import DTYPE
from .weights import WeightSet

logger = logging.getLogger(__name__)


def _last_use(net: NetGraph) -> Dict[int, int]:
    last: Dict[int, int] = {}
    for node in net.nodes[:net.output + 1]:
        for src in node.inputs:
            last[src] = node.id
    return last


def _run_node(node, ins: List[np.ndarray], weights: WeightSet, precise: bool) -> np.ndarray:
    op = node.op
    if op == 'conv':
        return kernels.conv2d(ins[0], weights[node.id]['weight'], stride=node.stride, padding=node.padding,
                              dilation=node.dilation, groups=node.groups, precise=precise)
    if op == 'bn':
        p = weights[node.id]
        return kernels.batch_norm(ins[0], p['gamma'], p['beta'])
    if op == 'relu':
        return kernels.relu(ins[0])
    if op == 'max_pool':
        return kernels.max_pool3x3(ins[0], node.stride)
    if op == 'avg_pool':
        return kernels.avg_pool3x3(ins[0], node.stride)
    if op == 'factorized_reduce':
        p = weights[node.id]
        return kernels.factorized_reduce(ins[0], p['weight_a'], p['weight_b'])
    if op == 'zero':
        return kernels.zero(ins[0], node.stride)
    if op == 'add':
        return kernels.add(ins)
    if op == 'concat':
        return kernels.concat(ins)
    if op == 'gap':
        return kernels.global_avg_pool(ins[0])
    raise ShapeError(f"node {node.id}: op '{op}' cannot be executed")


def _execute(net: NetGraph, weights: WeightSet, x: np.ndarray, precise: bool, keep: bool) -> Dict[int, np.ndarray]:
    if x.ndim != 4 or tuple(x.shape[1:]) != net.input_shape:
        raise ShapeError(f"input shape {x.shape} does not match network input (n, {net.input_shape})")
    x = np.asarray(x, dtype=DTYPE)
    last = _last_use(net)
    values: Dict[int, np.ndarray] = {0: x}
    for node in net.nodes[1:net.output + 1]:
        ins = [values[src] for src in node.inputs]
        out = _run_node(node, ins, weights, precise)
        expected = (x.shape[0], node.c_out, node.h_out, node.w_out)
        if out.shape != expected:
            raise ShapeError(f"node {node.id} ({node.op}) produced {out.shape}, expected {expected}")
        if not np.isfinite(out).all():
            raise NonFiniteError(f"node {node.id} ({node.op}, {node.scope}) produced non-finite activations")
        values[node.id] = out
        if not keep:
            for src in node.inputs:
                if last.get(src) == node.id:
                    values.pop(src, None)
    return values


def forward(net: NetGraph, weights: WeightSet, x: np.ndarray, precise: bool = False) -> np.ndarray:
    """Run the backbone and return the pooled features, shape (n, feature_dim, 1, 1).

    Pure: neither ``weights`` nor ``x`` is modified. Normalization uses the
    statistics of ``x`` itself, so the batch composition is part of the input.
    """
    return _execute(net, weights, x, precise, keep=False)[net.output]


def activations(net: NetGraph, weights: WeightSet, x: np.ndarray) -> Dict[int, np.ndarray]:
    """Every node's output by node id, the input included as node 0."""
    return _execute(net, weights, x, precise=False, keep=True)
