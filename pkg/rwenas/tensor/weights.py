"""
Random, frozen backbone weights.

Every parameter array is drawn from one ``numpy`` generator seeded with the stored
seed, walking the graph nodes in order, so ``init_weights(net, seed)`` always
regenerates the same bytes. Arrays are marked read-only once created.
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from .. import settings
from ..netgraph import NetGraph
from .kernels import DTYPE

logger = logging.getLogger(__name__)

SCHEMES = ('pytorch_default', 'kaiming_normal', 'kaiming_uniform', 'xavier_normal', 'xavier_uniform')


@dataclass(frozen=True)
class WeightSet:
    params: Mapping[int, Mapping[str, np.ndarray]]
    seed: int
    scheme: str = settings.INIT_SCHEME

    def __getitem__(self, node_id: int) -> Mapping[str, np.ndarray]:
        return self.params[node_id]

    def fingerprint(self) -> str:
        """SHA-256 over every parameter's name, shape and bytes."""
        digest = hashlib.sha256()
        for node_id in sorted(self.params):
            for name in sorted(self.params[node_id]):
                arr = self.params[node_id][name]
                digest.update(f"{node_id}/{name}/{arr.shape}".encode())
                digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def count(self) -> int:
        return sum(arr.size for node in self.params.values() for arr in node.values())


def fans(shape: Tuple[int, ...]) -> Tuple[int, int]:
    """(fan_in, fan_out) of a (c_out, c_in / groups, k, k) kernel."""
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return shape[1] * receptive, shape[0] * receptive


def sample_kernel(shape: Tuple[int, ...], scheme: str, rng: np.random.Generator) -> np.ndarray:
    fan_in, fan_out = fans(shape)
    if scheme == 'pytorch_default':
        # kaiming_uniform with a = sqrt(5) reduces to this bound
        bound = 1.0 / math.sqrt(fan_in)
        values = rng.uniform(-bound, bound, size=shape)
    elif scheme == 'kaiming_uniform':
        bound = math.sqrt(6.0 / fan_in)
        values = rng.uniform(-bound, bound, size=shape)
    elif scheme == 'kaiming_normal':
        values = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
    elif scheme == 'xavier_uniform':
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        values = rng.uniform(-bound, bound, size=shape)
    elif scheme == 'xavier_normal':
        values = rng.normal(0.0, math.sqrt(2.0 / (fan_in + fan_out)), size=shape)
    else:
        raise ValueError(f"unknown init scheme '{scheme}', expected one of {', '.join(SCHEMES)}")
    return values.astype(DTYPE)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def init_weights(net: NetGraph, seed: int, scheme: str = settings.INIT_SCHEME) -> WeightSet:
    rng = np.random.default_rng(seed)
    params: Dict[int, Dict[str, np.ndarray]] = {}
    for node in net.nodes:
        if node.op == 'conv':
            shape = (node.c_out, node.c_in // node.groups, node.kernel, node.kernel)
            params[node.id] = {'weight': _frozen(sample_kernel(shape, scheme, rng))}
        elif node.op == 'factorized_reduce':
            half = node.c_out // 2
            params[node.id] = {
                'weight_a': _frozen(sample_kernel((half, node.c_in, 1, 1), scheme, rng)),
                'weight_b': _frozen(sample_kernel((node.c_out - half, node.c_in, 1, 1), scheme, rng)),
            }
        elif node.op == 'bn':
            params[node.id] = {
                'gamma': _frozen(np.ones(node.c_out, dtype=DTYPE)),
                'beta': _frozen(np.zeros(node.c_out, dtype=DTYPE)),
            }
    weights = WeightSet(params, seed, scheme)
    logger.debug(f"Initialized {weights.count()} backbone parameters ({scheme}, seed {seed})")
    return weights
