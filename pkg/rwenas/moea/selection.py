"""
Mating selection and offspring generation.
"""

from typing import List, Sequence

import numpy as np

from ..config import OperatorConfig
from ..genome import Genome, SearchSpaceSpec, polynomial_mutation, two_point_crossover
from .sorting import Individual


def binary_tournament(pop: Sequence[Individual], rng: np.random.Generator) -> Individual:
    """Lower rank wins, then larger crowding distance, then a fair coin."""
    if len(pop) == 1:
        return pop[0]
    i, j = (int(k) for k in rng.choice(len(pop), size=2, replace=False))
    a, b = pop[i], pop[j]
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if rng.random() < 0.5 else b


def make_offspring(pop: Sequence[Individual], spec: SearchSpaceSpec, ops: OperatorConfig,
                   rng: np.random.Generator, count: int) -> List[Genome]:
    children: List[Genome] = []
    while len(children) < count:
        a = binary_tournament(pop, rng).genome
        b = binary_tournament(pop, rng).genome
        if rng.random() < ops.crossover_prob:
            a, b = two_point_crossover(a, b, rng, spec)
        children.append(polynomial_mutation(a, spec, rng, ops.eta_m, ops.mutation_prob))
        children.append(polynomial_mutation(b, spec, rng, ops.eta_m, ops.mutation_prob))
    return children[:count]
