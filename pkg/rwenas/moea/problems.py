"""
Enumerable bi-objective test problems used to check the search loop.
"""

from typing import List, Tuple

import numpy as np

from ..genome import Genome, SearchSpaceSpec
from .evaluators import Evaluation
from .metrics import pareto_mask


class SchafferEvaluator:
    """f1 = x^2, f2 = (x - 2)^2 with x = gene / 10 for one integer gene in [0, 40].

    The Pareto set is x in [0, 2].
    """

    spec = SearchSpaceSpec.vector([(0, 40)])
    reference_point: Tuple[float, float] = (4.4, 4.4)
    objective_names = ('f1', 'f2')
    resolution = 10.0

    def evaluate(self, genome: Genome, seed: int) -> Evaluation:
        x = genome.genes[0] / self.resolution
        return Evaluation((x * x, (x - 2.0) ** 2))

    def all_points(self) -> np.ndarray:
        lo, hi = self.spec.bounds[0]
        return np.array([self.evaluate(Genome('vector', (g,)), 0).objectives for g in range(lo, hi + 1)])

    def true_front(self) -> np.ndarray:
        points = self.all_points()
        return points[pareto_mask(points)]

    def pareto_genes(self) -> List[int]:
        lo, hi = self.spec.bounds[0]
        points = self.all_points()
        return [g for g, keep in zip(range(lo, hi + 1), pareto_mask(points)) if keep]
