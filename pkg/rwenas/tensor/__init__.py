"""Minimal inference engine for decoded networks, plus the gradients used for reference training."""

from .backward import backward
from .engine import activations, forward
from .kernels import (
    add,
    avg_pool3x3,
    batch_norm,
    concat,
    conv2d,
    factorized_reduce,
    global_avg_pool,
    max_pool3x3,
    relu,
    zero,
)
from .weights import SCHEMES, WeightSet, init_weights

__all__ = [
    'forward',
    'activations',
    'backward',
    'init_weights',
    'WeightSet',
    'SCHEMES',
    'conv2d',
    'relu',
    'max_pool3x3',
    'avg_pool3x3',
    'factorized_reduce',
    'zero',
    'add',
    'concat',
    'global_avg_pool',
    'batch_norm',
]
