"""
Gradients of the forward kernels, used only to train reference networks.

Each ``*_backward`` takes the forward inputs (and output where it helps) plus the
gradient of the loss with respect to the output, and returns float64 gradients
with respect to the inputs and parameters. ``backward`` walks a decoded graph in
reverse and collects the parameter gradients per node.
"""

from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .. import settings
from ..errors import ShapeError
from ..netgraph import LayerNode, NetGraph
from .kernels import _out_size, _taps

Grads = Dict[str, np.ndarray]


def _tap_slices(kernel: int, stride: int, dilation: int, ho: int, wo: int):
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    for i in range(kernel):
        for j in range(kernel):
            yield i, j, (slice(None), slice(None),
                         slice(i * dilation, i * dilation + span_h, stride),
                         slice(j * dilation, j * dilation + span_w, stride))


def _crop(xp: np.ndarray, padding: int, h: int, w: int) -> np.ndarray:
    return xp[:, :, padding:padding + h, padding:padding + w] if padding else xp


def conv2d_backward(x: np.ndarray, weight: np.ndarray, grad: np.ndarray, stride: int = 1, padding: int = 0,
                    dilation: int = 1, groups: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    n, c, h, w = x.shape
    c_out, c_group, k, _ = weight.shape
    ho, wo = grad.shape[2:]
    per_group = c_out // groups
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    xp = xp.astype(np.float64)
    g = grad.astype(np.float64).reshape(n, groups, per_group, ho, wo)
    wt = weight.astype(np.float64)
    dxp = np.zeros_like(xp)
    dw = np.zeros(weight.shape, dtype=np.float64)
    for i, j, sl in _tap_slices(k, stride, dilation, ho, wo):
        tap = xp[sl].reshape(n, groups, c_group, ho, wo)
        wg = wt[:, :, i, j].reshape(groups, per_group, c_group)
        dw[:, :, i, j] = np.einsum('ngohw,ngchw->goc', g, tap).reshape(c_out, c_group)
        dxp[sl] += np.einsum('ngohw,goc->ngchw', g, wg).reshape(n, c, ho, wo)
    return _crop(dxp, padding, h, w), dw


def batch_norm_backward(x: np.ndarray, gamma: np.ndarray, grad: np.ndarray,
                        eps: float = settings.BN_EPS) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    axes = (0, 2, 3)
    x = x.astype(np.float64)
    g = grad.astype(np.float64)
    mean = x.mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.var(axis=axes, keepdims=True) + eps)
    x_hat = (x - mean) * inv_std
    d_beta = g.sum(axis=axes)
    d_gamma = (g * x_hat).sum(axis=axes)
    d_hat = g * gamma.astype(np.float64)[None, :, None, None]
    dx = inv_std * (d_hat - d_hat.mean(axis=axes, keepdims=True)
                    - x_hat * (d_hat * x_hat).mean(axis=axes, keepdims=True))
    return dx, d_gamma, d_beta


def relu_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return grad.astype(np.float64) * (x > 0)


def max_pool3x3_backward(x: np.ndarray, out: np.ndarray, grad: np.ndarray, stride: int = 1) -> np.ndarray:
    """Route each output gradient to the first window position holding the maximum."""
    _, _, h, w = x.shape
    ho, wo = out.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    dxp = np.zeros(xp.shape, dtype=np.float64)
    g = grad.astype(np.float64)
    taken = np.zeros(out.shape, dtype=bool)
    for _, _, sl in _tap_slices(3, stride, 1, ho, wo):
        hit = (xp[sl] == out) & ~taken
        dxp[sl] += g * hit
        taken |= hit
    return _crop(dxp, 1, h, w)


def avg_pool3x3_backward(x: np.ndarray, grad: np.ndarray, stride: int = 1) -> np.ndarray:
    _, _, h, w = x.shape
    ho, wo = _out_size(h, 3, stride, 1, 1), _out_size(w, 3, stride, 1, 1)
    ones = np.pad(np.ones((1, 1, h, w)), ((0, 0), (0, 0), (1, 1), (1, 1)))
    count = sum(_taps(ones, 3, stride, 1, ho, wo))
    share = grad.astype(np.float64) / count
    dxp = np.zeros((x.shape[0], x.shape[1], h + 2, w + 2), dtype=np.float64)
    for _, _, sl in _tap_slices(3, stride, 1, ho, wo):
        dxp[sl] += share
    return _crop(dxp, 1, h, w)


def factorized_reduce_backward(x: np.ndarray, weight_a: np.ndarray, weight_b: np.ndarray,
                               grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    half = weight_a.shape[0]
    dx, dw_a = conv2d_backward(x, weight_a, grad[:, :half], stride=2)
    dx_b, dw_b = conv2d_backward(x[:, :, 1:, 1:], weight_b, grad[:, half:], stride=2)
    dx[:, :, 1:, 1:] += dx_b
    return dx, dw_a, dw_b


def global_avg_pool_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    _, _, h, w = x.shape
    return np.broadcast_to(grad.astype(np.float64) / (h * w), x.shape).copy()


def _node_backward(node: LayerNode, ins: List[np.ndarray], out: np.ndarray,
                   params: Mapping[str, np.ndarray], grad: np.ndarray) -> Tuple[List[np.ndarray], Grads]:
    op = node.op
    if op == 'conv':
        dx, dw = conv2d_backward(ins[0], params['weight'], grad, node.stride, node.padding,
                                 node.dilation, node.groups)
        return [dx], {'weight': dw}
    if op == 'bn':
        dx, d_gamma, d_beta = batch_norm_backward(ins[0], params['gamma'], grad)
        return [dx], {'gamma': d_gamma, 'beta': d_beta}
    if op == 'relu':
        return [relu_backward(ins[0], grad)], {}
    if op == 'max_pool':
        return [max_pool3x3_backward(ins[0], out, grad, node.stride)], {}
    if op == 'avg_pool':
        return [avg_pool3x3_backward(ins[0], grad, node.stride)], {}
    if op == 'factorized_reduce':
        dx, dw_a, dw_b = factorized_reduce_backward(ins[0], params['weight_a'], params['weight_b'], grad)
        return [dx], {'weight_a': dw_a, 'weight_b': dw_b}
    if op == 'zero':
        return [np.zeros(ins[0].shape, dtype=np.float64)], {}
    if op == 'add':
        g = grad.astype(np.float64)
        return [g] * len(ins), {}
    if op == 'concat':
        cuts = np.cumsum([t.shape[1] for t in ins])[:-1]
        return list(np.split(grad.astype(np.float64), cuts, axis=1)), {}
    if op == 'gap':
        return [global_avg_pool_backward(ins[0], grad)], {}
    raise ShapeError(f"node {node.id}: op '{op}' has no gradient")


def backward(net: NetGraph, params: Mapping[int, Mapping[str, np.ndarray]],
             values: Mapping[int, np.ndarray], grad_output: np.ndarray) -> Dict[int, Grads]:
    """Parameter gradients per node id, given every activation and d(loss)/d(output).

    Nodes that do not reach the output get no entry.
    """
    pending: Dict[int, np.ndarray] = {net.output: grad_output.astype(np.float64)}
    grads: Dict[int, Grads] = {}
    for node in reversed(net.nodes[1:net.output + 1]):
        grad = pending.pop(node.id, None)
        if grad is None:
            continue
        ins: Sequence[np.ndarray] = [values[src] for src in node.inputs]
        d_ins, d_params = _node_backward(node, list(ins), values[node.id], params.get(node.id, {}), grad)
        if d_params:
            grads[node.id] = d_params
        for src, d in zip(node.inputs, d_ins):
            pending[src] = pending[src] + d if src in pending else d
    return grads
