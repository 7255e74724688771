"""
Non-dominated sorting, crowding distance and elitist survivor selection.

All objectives are minimized.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..genome import Genome
from ..items import EvalReport, IndividualRecord

INF = math.inf


@dataclass
class Individual:
    genome: Genome
    objectives: Tuple[float, ...] = ()
    rank: int = -1
    crowding: float = 0.0
    seed: int = 0
    report: Optional[EvalReport] = None
    failed: bool = False
    offspring: bool = False

    def to_record(self) -> IndividualRecord:
        return IndividualRecord(
            genome=self.genome.to_string(),
            objectives=list(self.objectives),
            rank=self.rank,
            crowding=None if math.isinf(self.crowding) else self.crowding,
            seed=self.seed,
            failed=self.failed,
            offspring=self.offspring,
        )


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """``a`` is no worse than ``b`` everywhere and strictly better somewhere."""
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def constrained_dominates(a: Individual, b: Individual) -> bool:
    """Dominance where any successful evaluation beats any failed one."""
    if a.failed != b.failed:
        return b.failed
    return dominates(a.objectives, b.objectives)


def nondominated_sort(pop: Sequence[Individual]) -> List[List[Individual]]:
    """Split ``pop`` into fronts (front 0 non-dominated) and set each ``rank``.

    Failed individuals are ranked behind every successful one whatever their
    objective values.
    """
    n = len(pop)
    dominated_by: List[List[int]] = [[] for _ in range(n)]
    counts = [0] * n
    current: List[int] = []
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if constrained_dominates(pop[p], pop[q]):
                dominated_by[p].append(q)
            elif constrained_dominates(pop[q], pop[p]):
                counts[p] += 1
        if counts[p] == 0:
            current.append(p)

    fronts: List[List[Individual]] = []
    rank = 0
    while current:
        fronts.append([pop[i] for i in current])
        for i in current:
            pop[i].rank = rank
        following = []
        for p in current:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    following.append(q)
        current = sorted(following)
        rank += 1
    return fronts


def crowding_distance(front: Sequence[Individual]) -> List[float]:
    """Crowding distance of each member of ``front``, also stored on the individuals.

    Boundary members of every objective get +inf; ties in objective values keep
    their front order (stable sort).
    """
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        distances = [INF] * n
    else:
        distances = [0.0] * n
        for m in range(len(front[0].objectives)):
            order = sorted(range(n), key=lambda i: front[i].objectives[m])
            lo = front[order[0]].objectives[m]
            hi = front[order[-1]].objectives[m]
            distances[order[0]] = distances[order[-1]] = INF
            if hi == lo:
                continue
            for k in range(1, n - 1):
                gap = front[order[k + 1]].objectives[m] - front[order[k - 1]].objectives[m]
                distances[order[k]] += gap / (hi - lo)
    for ind, d in zip(front, distances):
        ind.crowding = d
    return distances


def assign_rank_and_crowding(pop: Sequence[Individual]) -> List[List[Individual]]:
    fronts = nondominated_sort(pop)
    for front in fronts:
        crowding_distance(front)
    return fronts


def environmental_selection(union: Sequence[Individual], size: int) -> List[Individual]:
    """Keep whole fronts while they fit, then the most spread-out part of the next one."""
    survivors: List[Individual] = []
    for front in assign_rank_and_crowding(union):
        room = size - len(survivors)
        if room <= 0:
            break
        if len(front) <= room:
            survivors.extend(front)
        else:
            survivors.extend(sorted(front, key=lambda ind: -ind.crowding)[:room])
    return survivors
