"""
Genome encodings for the micro (cell) and macro (connection pattern) search spaces,
plus random sampling, repair and the variation operators used by the search.

A genome is a flat tuple of integers. Its layout is owned by ``SearchSpaceSpec``:

* micro: two cells (normal, then reduction) of ``MICRO_NODES`` node-specs each, a
  node-spec being ``(input1, op1, input2, op2)``. Node ``i`` reads from the two cell
  inputs or an earlier node, so its input genes lie in ``[0, i + 1]``.
* macro: ``MACRO_PHASES`` bitstrings of ``K(K-1)/2`` bits, the lower-triangular
  adjacency of the phase's ``K`` nodes in ``(1,0), (2,0), (2,1), (3,0) ...`` order.
* vector: plain bounded integers, used by the enumerable test problems.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import settings
from .errors import EncodingError

logger = logging.getLogger(__name__)

OPS = [
    'identity',
    'sep_conv_3x3',
    'sep_conv_5x5',
    'dil_conv_3x3',
    'dil_conv_5x5',
    'max_pool_3x3',
    'avg_pool_3x3',
    'zero',
]

KINDS = ('micro', 'macro', 'vector')

Bounds = Tuple[Tuple[int, int], ...]


class NodeSpec(NamedTuple):
    input1: int
    op1: int
    input2: int
    op2: int


@dataclass(frozen=True)
class Genome:
    kind: str
    genes: Tuple[int, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EncodingError(f"unknown genome kind '{self.kind}'")
        object.__setattr__(self, 'genes', tuple(int(v) for v in self.genes))

    def __len__(self) -> int:
        return len(self.genes)

    def __str__(self) -> str:
        return self.to_string()

    def to_string(self) -> str:
        """Canonical one-line text form, e.g. ``micro:0,1,1,3,...``."""
        return f"{self.kind}:" + ','.join(str(v) for v in self.genes)

    @classmethod
    def from_string(cls, text: str) -> 'Genome':
        kind, sep, body = text.strip().partition(':')
        if not sep or kind not in KINDS:
            raise EncodingError(f"genome text must start with one of {', '.join(k + ':' for k in KINDS)}: {text!r}")
        if not body:
            raise EncodingError(f"genome text has no genes: {text!r}")
        try:
            genes = tuple(int(tok) for tok in body.split(','))
        except ValueError:
            raise EncodingError(f"genome genes must be comma-separated integers: {text!r}") from None
        return cls(kind, genes)

    def digest(self) -> str:
        return hashlib.sha256(self.to_string().encode('utf-8')).hexdigest()

    def replace(self, genes: Sequence[int]) -> 'Genome':
        return Genome(self.kind, tuple(genes))

    # Micro views

    def cell(self, which: int) -> List[NodeSpec]:
        """Node-specs of the normal (0) or reduction (1) cell."""
        if self.kind != 'micro':
            raise EncodingError(f"{self.kind} genome has no cells")
        size = 4 * settings.MICRO_NODES
        chunk = self.genes[which * size:(which + 1) * size]
        return [NodeSpec(*chunk[i:i + 4]) for i in range(0, size, 4)]

    @property
    def normal_cell(self) -> List[NodeSpec]:
        return self.cell(0)

    @property
    def reduction_cell(self) -> List[NodeSpec]:
        return self.cell(1)

    # Macro view

    @property
    def phases(self) -> List[Tuple[int, ...]]:
        if self.kind != 'macro':
            raise EncodingError(f"{self.kind} genome has no phases")
        bits = phase_bits(settings.MACRO_NODES)
        return [self.genes[p * bits:(p + 1) * bits] for p in range(settings.MACRO_PHASES)]


def phase_bits(nodes: int) -> int:
    return nodes * (nodes - 1) // 2


def phase_edges(nodes: int) -> List[Tuple[int, int]]:
    """(source, target) pairs in bit order for one macro phase."""
    return [(i, j) for j in range(1, nodes) for i in range(j)]


@dataclass(frozen=True)
class SearchSpaceSpec:
    kind: str
    bounds: Bounds
    compat_mode: bool = False

    @classmethod
    def micro(cls, compat_mode: bool = False) -> 'SearchSpaceSpec':
        cell: List[Tuple[int, int]] = []
        for i in range(settings.MICRO_NODES):
            inputs = (0, i + 1)
            ops = (0, settings.MICRO_OPS - 1)
            cell += [inputs, ops, inputs, ops]
        return cls('micro', tuple(cell * 2), compat_mode)

    @classmethod
    def macro(cls) -> 'SearchSpaceSpec':
        length = settings.MACRO_PHASES * phase_bits(settings.MACRO_NODES)
        return cls('macro', ((0, 1),) * length)

    @classmethod
    def vector(cls, bounds: Sequence[Tuple[int, int]]) -> 'SearchSpaceSpec':
        return cls('vector', tuple((int(lo), int(hi)) for lo, hi in bounds))

    @classmethod
    def named(cls, kind: str, compat_mode: bool = False) -> 'SearchSpaceSpec':
        if kind == 'micro':
            return cls.micro(compat_mode)
        if kind == 'macro':
            return cls.macro()
        raise EncodingError(f"no default search space for kind '{kind}'")

    def __len__(self) -> int:
        return len(self.bounds)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds], dtype=np.int64)

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds], dtype=np.int64)

    def violations(self, genome: Genome) -> List[Tuple[int, str]]:
        """(gene index, reason) for every gene that breaks this space."""
        if genome.kind != self.kind:
            return [(-1, f"genome kind {genome.kind} does not match space {self.kind}")]
        if len(genome) != len(self):
            return [(-1, f"genome has {len(genome)} genes, space expects {len(self)}")]
        found = []
        for pos, (value, (lo, hi)) in enumerate(zip(genome.genes, self.bounds)):
            if not lo <= value <= hi:
                found.append((pos, f"gene {pos} = {value} outside [{lo}, {hi}]"))
        if self.kind == 'micro' and self.compat_mode:
            for pos in duplicate_input_positions(genome):
                found.append((pos, f"gene {pos}: node reads the same input twice"))
        return found

    def is_valid(self, genome: Genome) -> bool:
        return not self.violations(genome)

    def check_same_space(self, *genomes: Genome) -> None:
        for g in genomes:
            if g.kind != self.kind or len(g) != len(self):
                raise EncodingError(f"genome {g} does not belong to the {self.kind} space")


def duplicate_input_positions(genome: Genome) -> List[int]:
    """Gene index of ``input2`` for every micro node whose two inputs coincide."""
    positions = []
    for start in range(0, len(genome.genes), 4):
        if genome.genes[start] == genome.genes[start + 2]:
            positions.append(start + 2)
    return positions


def sample_random(spec: SearchSpaceSpec, rng: np.random.Generator) -> Genome:
    genes = rng.integers(spec.lower, spec.upper + 1)
    genome = Genome(spec.kind, tuple(genes))
    if spec.compat_mode:
        genome = repair(genome, spec, rng)
    return genome


def two_point_crossover(
    a: Genome,
    b: Genome,
    rng: np.random.Generator,
    spec: Optional[SearchSpaceSpec] = None,
    cuts: Optional[Tuple[int, int]] = None,
) -> Tuple[Genome, Genome]:
    """Swap the gene segment ``[lo, hi)`` between two parents.

    Cut points are drawn as two distinct positions in ``[0, len]`` unless given.
    """
    if a.kind != b.kind or len(a) != len(b):
        raise EncodingError(f"cannot cross {a.kind}/{len(a)} with {b.kind}/{len(b)}")
    if spec is not None:
        spec.check_same_space(a, b)
    if cuts is None:
        lo, hi = sorted(int(c) for c in rng.choice(len(a) + 1, size=2, replace=False))
    else:
        lo, hi = cuts
    genes_a, genes_b = list(a.genes), list(b.genes)
    genes_a[lo:hi], genes_b[lo:hi] = b.genes[lo:hi], a.genes[lo:hi]
    child_a, child_b = a.replace(genes_a), b.replace(genes_b)
    if spec is not None and spec.compat_mode:
        child_a = repair(child_a, spec, rng)
        child_b = repair(child_b, spec, rng)
    return child_a, child_b


def _perturb(x: float, lo: float, hi: float, eta: float, u: float) -> float:
    span = hi - lo
    if span <= 0:
        return x
    delta1 = (x - lo) / span
    delta2 = (hi - x) / span
    power = 1.0 / (eta + 1.0)
    if u < 0.5:
        xy = 1.0 - delta1
        val = 2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0)
        deltaq = val ** power - 1.0
    else:
        xy = 1.0 - delta2
        val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0)
        deltaq = 1.0 - val ** power
    return x + deltaq * span


def polynomial_mutation(
    g: Genome,
    spec: SearchSpaceSpec,
    rng: np.random.Generator,
    eta_m: float = settings.MUTATION_ETA,
    p_m: Optional[float] = None,
) -> Genome:
    """Bounded polynomial mutation adapted to integer genes.

    The real-valued perturbation is computed over ``[lo, hi]``, then rounded to
    the nearest integer and clamped. ``p_m`` defaults to ``1 / len(g)``.
    """
    if eta_m <= 0:
        raise ValueError(f"eta_m must be positive, got {eta_m}")
    if p_m is None:
        p_m = 1.0 / len(g)
    if not 0.0 <= p_m <= 1.0:
        raise ValueError(f"p_m must lie in [0, 1], got {p_m}")
    spec.check_same_space(g)

    genes = list(g.genes)
    for pos, (lo, hi) in enumerate(spec.bounds):
        if rng.random() >= p_m:
            continue
        value = _perturb(float(genes[pos]), float(lo), float(hi), eta_m, float(rng.random()))
        genes[pos] = int(min(max(int(np.rint(value)), lo), hi))
    mutated = g.replace(genes)
    if spec.compat_mode:
        mutated = repair(mutated, spec, rng)
    return mutated


def repair(g: Genome, spec: SearchSpaceSpec, rng: np.random.Generator) -> Genome:
    """Resample ``input2`` of every micro node that reads the same input twice.

    The replacement is drawn uniformly from the node's legal inputs minus
    ``input1``. Genomes outside compat mode pass through unchanged.
    """
    if spec.kind != 'micro' or not spec.compat_mode:
        return g
    positions = duplicate_input_positions(g)
    if not positions:
        return g
    genes = list(g.genes)
    for pos in positions:
        lo, hi = spec.bounds[pos]
        legal = [k for k in range(lo, hi + 1) if k != genes[pos - 2]]
        genes[pos] = int(rng.choice(legal))
    logger.debug(f"Repaired {len(positions)} duplicate connection(s) in {g}")
    return g.replace(genes)
