"""
The NSGA-II search loop.

Each generation: binary tournaments pick parents, two-point crossover and
polynomial mutation make ``pop_size`` offspring, new genomes are evaluated (in a
process pool when ``workers > 1``), and survivors are chosen from the union of
parents and offspring by non-dominated sorting and crowding distance.

Every unique genome is evaluated once per run, with a seed derived from the run
seed and the genome, and served from the cache afterwards. Pipelines receive the
union of every generation, the same way item pipelines receive scraped items.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import settings
from ..config import SearchConfig
from ..errors import EvaluationError
from ..genome import Genome, SearchSpaceSpec, sample_random
from ..items import EvalReport, GenerationRecord
from ..seeds import derive_seed
from .evaluators import Evaluation, Evaluator
from .metrics import hypervolume
from .selection import make_offspring
from .sorting import Individual, assign_rank_and_crowding, environmental_selection

logger = logging.getLogger(__name__)

_worker_evaluator: Optional[Evaluator] = None


@dataclass(frozen=True)
class Outcome:
    objectives: tuple
    report: Optional[EvalReport] = None
    failed: bool = False


def _safe_evaluate(evaluator: Evaluator, genome: Genome, seed: int) -> Outcome:
    try:
        result: Evaluation = evaluator.evaluate(genome, seed)
    except EvaluationError as e:
        logger.warning(f"❌ {e}")
        return Outcome((settings.FAILED_RWE_ERROR, settings.FAILED_FLOPS_M), None, True)
    objectives = tuple(float(v) for v in result.objectives)
    if not all(math.isfinite(v) for v in objectives):
        logger.warning(f"❌ non-finite objectives {objectives} for {genome}")
        return Outcome((settings.FAILED_RWE_ERROR, settings.FAILED_FLOPS_M), result.report, True)
    return Outcome(objectives, result.report)


def _init_worker(evaluator: Evaluator) -> None:
    global _worker_evaluator
    _worker_evaluator = evaluator


def _evaluate_in_worker(genome: Genome, seed: int) -> Outcome:
    return _safe_evaluate(_worker_evaluator, genome, seed)


class SearchPipeline:
    """Hooks called by ``EvolutionarySearch``; subclasses override what they need."""

    def open_search(self, search: 'EvolutionarySearch') -> None:
        pass

    def process_generation(self, record: GenerationRecord, search: 'EvolutionarySearch') -> None:
        pass

    def close_search(self, result: 'SearchResult', search: 'EvolutionarySearch') -> None:
        pass


@dataclass
class SearchResult:
    archive: List[GenerationRecord]
    population: List[Individual]
    front: List[Individual]
    evaluations: int
    cache_hits: int


@dataclass
class EvolutionarySearch:
    cfg: SearchConfig
    evaluator: Evaluator
    seed: int = 0
    workers: int = 1
    pipelines: Sequence[SearchPipeline] = ()
    spec: Optional[SearchSpaceSpec] = None
    cache: Dict[str, Outcome] = field(default_factory=dict)
    new_reports: List[EvalReport] = field(default_factory=list)
    generation: int = 0
    evaluations: int = 0
    cache_hits: int = 0

    def __post_init__(self):
        if self.spec is None:
            self.spec = self.evaluator.spec
        self._pool: Optional[ProcessPoolExecutor] = None

    def genome_seed(self, genome: Genome) -> int:
        return derive_seed(self.seed, genome.digest())

    def _evaluate(self, individuals: Sequence[Individual]) -> None:
        pending: List[Genome] = []
        queued = set()
        for ind in individuals:
            key = ind.genome.to_string()
            if key in self.cache or key in queued:
                self.cache_hits += 1
                continue
            queued.add(key)
            pending.append(ind.genome)

        seeds = [self.genome_seed(g) for g in pending]
        if self._pool is not None and len(pending) > 1:
            outcomes = list(self._pool.map(_evaluate_in_worker, pending, seeds))
        else:
            outcomes = [_safe_evaluate(self.evaluator, g, s) for g, s in zip(pending, seeds)]

        self.new_reports = []
        for genome, outcome in zip(pending, outcomes):
            self.cache[genome.to_string()] = outcome
            if outcome.report is not None:
                self.new_reports.append(outcome.report)
        self.evaluations += len(pending)

        for ind in individuals:
            outcome = self.cache[ind.genome.to_string()]
            ind.objectives = outcome.objectives
            ind.report = outcome.report
            ind.failed = outcome.failed
            ind.seed = self.genome_seed(ind.genome)

    def _record(self, individuals: Sequence[Individual]) -> GenerationRecord:
        hv = None
        ref = getattr(self.evaluator, 'reference_point', None)
        if ref is not None:
            points = np.array([ind.objectives for ind in individuals if ind.rank == 0 and not ind.failed])
            hv = hypervolume(points, ref) if len(points) else 0.0
        record = GenerationRecord(generation=self.generation, hypervolume=hv,
                                  individuals=[ind.to_record() for ind in individuals])
        for pipeline in self.pipelines:
            pipeline.process_generation(record, self)
        return record

    def run(self) -> SearchResult:
        cfg = self.cfg
        rng = np.random.default_rng(derive_seed(self.seed, 'search'))
        archive: List[GenerationRecord] = []
        for pipeline in self.pipelines:
            pipeline.open_search(self)

        if self.workers > 1:
            self._pool = ProcessPoolExecutor(max_workers=self.workers, initializer=_init_worker,
                                             initargs=(self.evaluator,))
        try:
            self.generation = 0
            population = [Individual(sample_random(self.spec, rng)) for _ in range(cfg.pop_size)]
            self._evaluate(population)
            assign_rank_and_crowding(population)
            archive.append(self._record(population))

            for gen in range(1, cfg.max_gen + 1):
                self.generation = gen
                children = make_offspring(population, self.spec, cfg.operators, rng, cfg.pop_size)
                offspring = [Individual(g, offspring=True) for g in children]
                self._evaluate(offspring)
                for ind in population:
                    ind.offspring = False
                union = population + offspring
                assign_rank_and_crowding(union)
                archive.append(self._record(union))
                population = environmental_selection(union, cfg.pop_size)
                assign_rank_and_crowding(population)
                logger.info(f"Generation {gen}: {len(self.new_reports)} new evaluations, "
                            f"{self.evaluations} total, {self.cache_hits} cache hits")
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None

        front = [ind for ind in population if ind.rank == 0 and not ind.failed]
        front.sort(key=lambda ind: ind.objectives)
        result = SearchResult(archive, population, front, self.evaluations, self.cache_hits)
        for pipeline in self.pipelines:
            pipeline.close_search(result, self)
        return result


def run_search(cfg: SearchConfig, evaluator: Evaluator, seed: int = 0, workers: int = 1,
               pipelines: Sequence[SearchPipeline] = (), spec: Optional[SearchSpaceSpec] = None) -> SearchResult:
    return EvolutionarySearch(cfg, evaluator, seed=seed, workers=workers, pipelines=pipelines, spec=spec).run()
