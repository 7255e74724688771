"""
Forward-only NCHW kernels on float32 numpy arrays.

Convolutions gather the shifted input windows tap by tap (the im2col idea without
materialising overlapping patches twice) and contract them with the kernel in one
``einsum``/``tensordot`` call, so the reduction order is fixed for a given shape.
"""

from typing import Sequence

import numpy as np

from .. import settings
from ..errors import ShapeError

DTYPE = np.float32


def _check4d(x: np.ndarray, name: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{name} expects a 4-D (n, c, h, w) tensor, got shape {x.shape}")


def _out_size(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def _taps(xp: np.ndarray, kernel: int, stride: int, dilation: int, ho: int, wo: int):
    """Yield the strided window view for each (i, j) kernel tap, row-major."""
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    for i in range(kernel):
        for j in range(kernel):
            yield xp[:, :, i * dilation:i * dilation + span_h:stride, j * dilation:j * dilation + span_w:stride]


def conv2d(x: np.ndarray, weight: np.ndarray, stride: int = 1, padding: int = 0, dilation: int = 1,
           groups: int = 1, precise: bool = False) -> np.ndarray:
    """2-D cross-correlation without bias. ``weight`` is (c_out, c_in / groups, k, k)."""
    _check4d(x, 'conv2d')
    n, c, h, w = x.shape
    c_out, c_group, kh, kw = weight.shape
    if kh != kw:
        raise ShapeError(f"conv2d supports square kernels only, got {kh}x{kw}")
    if c != c_group * groups or c_out % groups:
        raise ShapeError(f"conv2d: input has {c} channels, weight {weight.shape} with groups={groups}")
    ho = _out_size(h, kh, stride, padding, dilation)
    wo = _out_size(w, kw, stride, padding, dilation)
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d: kernel {kh} (dilation {dilation}) larger than padded input {h}x{w}")

    acc = np.float64 if precise else DTYPE
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    xp = xp.astype(acc, copy=False)
    wt = weight.astype(acc, copy=False)

    if groups == c and c_out == c:
        # depthwise: one multiply-add sweep per tap
        out = np.zeros((n, c, ho, wo), dtype=acc)
        for t, tap in enumerate(_taps(xp, kh, stride, dilation, ho, wo)):
            out += tap * wt[:, 0, t // kw, t % kw][None, :, None, None]
        return out.astype(DTYPE, copy=False)

    taps = kh * kw
    cols = np.stack(list(_taps(xp, kh, stride, dilation, ho, wo)), axis=2)       # (n, c, T, ho, wo)
    cols = cols.reshape(n, groups, c_group * taps, ho, wo)
    wmat = wt.reshape(groups, c_out // groups, c_group * taps)
    if groups == 1:
        out = np.tensordot(wmat[0], cols[:, 0], axes=([1], [1]))                # (c_out, n, ho, wo)
        out = out.transpose(1, 0, 2, 3)
    else:
        out = np.einsum('ngkhw,gok->ngohw', cols, wmat).reshape(n, c_out, ho, wo)
    return np.ascontiguousarray(out, dtype=DTYPE)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0, dtype=DTYPE)


def max_pool3x3(x: np.ndarray, stride: int = 1) -> np.ndarray:
    _check4d(x, 'max_pool3x3')
    _, _, h, w = x.shape
    ho, wo = _out_size(h, 3, stride, 1, 1), _out_size(w, 3, stride, 1, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)), constant_values=-np.inf)
    out = None
    for tap in _taps(xp, 3, stride, 1, ho, wo):
        out = tap.copy() if out is None else np.maximum(out, tap)
    return out.astype(DTYPE, copy=False)


def avg_pool3x3(x: np.ndarray, stride: int = 1) -> np.ndarray:
    """3x3 average over the valid (unpadded) positions of each window."""
    _check4d(x, 'avg_pool3x3')
    _, _, h, w = x.shape
    ho, wo = _out_size(h, 3, stride, 1, 1), _out_size(w, 3, stride, 1, 1)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ones = np.pad(np.ones((1, 1, h, w), dtype=DTYPE), ((0, 0), (0, 0), (1, 1), (1, 1)))
    total = np.zeros((x.shape[0], x.shape[1], ho, wo), dtype=DTYPE)
    count = np.zeros((1, 1, ho, wo), dtype=DTYPE)
    for tap, mask in zip(_taps(xp, 3, stride, 1, ho, wo), _taps(ones, 3, stride, 1, ho, wo)):
        total += tap
        count += mask
    return total / count


def factorized_reduce(x: np.ndarray, weight_a: np.ndarray, weight_b: np.ndarray) -> np.ndarray:
    """Halve the resolution with two 1x1 stride-2 convs offset by one pixel, then concat."""
    _check4d(x, 'factorized_reduce')
    a = conv2d(x, weight_a, stride=2)
    b = conv2d(x[:, :, 1:, 1:], weight_b, stride=2)
    if a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"factorized_reduce needs even spatial size, got {x.shape[2:]}")
    return np.concatenate([a, b], axis=1)


def zero(x: np.ndarray, stride: int = 1) -> np.ndarray:
    _check4d(x, 'zero')
    return np.zeros_like(x[:, :, ::stride, ::stride], dtype=DTYPE)


def add(xs: Sequence[np.ndarray]) -> np.ndarray:
    shapes = {t.shape for t in xs}
    if len(shapes) != 1:
        raise ShapeError(f"add needs equal shapes, got {sorted(shapes)}")
    out = xs[0].copy()
    for t in xs[1:]:
        out += t
    return out


def concat(xs: Sequence[np.ndarray]) -> np.ndarray:
    for t in xs:
        _check4d(t, 'concat')
    if len({(t.shape[0],) + t.shape[2:] for t in xs}) != 1:
        raise ShapeError(f"concat needs equal batch and spatial sizes, got {[t.shape for t in xs]}")
    return np.concatenate(xs, axis=1)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    _check4d(x, 'global_avg_pool')
    return x.mean(axis=(2, 3), keepdims=True, dtype=np.float64).astype(DTYPE)


def batch_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = settings.BN_EPS) -> np.ndarray:
    """Normalize with the statistics of the current batch (biased variance)."""
    _check4d(x, 'batch_norm')
    if gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm: {x.shape[1]} channels, affine shapes {gamma.shape}/{beta.shape}")
    mean = x.mean(axis=(0, 2, 3), keepdims=True, dtype=np.float64)
    var = x.var(axis=(0, 2, 3), keepdims=True, dtype=np.float64)
    scale = gamma[None, :, None, None] / np.sqrt(var + eps)
    return ((x - mean) * scale + beta[None, :, None, None]).astype(DTYPE)
