"""
Seed derivation. Every random stream in a run is derived from the run seed and a
stable label, so results never depend on evaluation order or worker count.
"""

import hashlib
from typing import Tuple, Union

Part = Union[int, str]


def derive_seed(*parts: Part) -> int:
    """63-bit seed from the SHA-256 of the ``:``-joined parts."""
    text = ':'.join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode('utf-8')).digest()[:8], 'big') >> 1


def split_seed(seed: int) -> Tuple[int, int]:
    """(backbone seed, classifier seed) for one evaluation."""
    return derive_seed(seed, 'backbone'), derive_seed(seed, 'classifier')
