"""
Benchmark tables and the estimator-correlation ablation.

A ``BenchmarkTable`` maps canonical genome strings to the accuracy a benchmark
reports for them. It is read from a ``genome,accuracy`` CSV and can stand in for
the RWE backend of the search, or serve as ground truth for ranking estimators:
``run_ablation`` drives the search with each estimator and records, every
generation, the Spearman correlation between the estimator's scores and the
table over the parents and offspring of that generation.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from .config import RunConfig, RweConfig, ScaleConfig
from .dataio import ImageDataset
from .errors import (ConfigError, EmptyTableError, EncodingError, EvaluationError, MissingEntryError,
                     TableParseError, UndefinedCorrelationError)
from .genome import Genome, SearchSpaceSpec
from .items import EvalReport, GenerationRecord, TraceRow
from .moea.evaluators import Evaluation
from .moea.search import EvolutionarySearch, SearchPipeline
from .netgraph import count_flops, count_params, decode
from .rwe import evaluate_rwe, scale_for
from .seeds import derive_seed
from .tensor.weights import SCHEMES

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkTable:
    entries: Mapping[str, float]
    kind: str = 'micro'
    compat_mode: bool = True

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, genome) -> bool:
        return _key(genome) in self.entries

    def accuracy(self, genome) -> float:
        key = _key(genome)
        try:
            return float(self.entries[key])
        except KeyError:
            raise MissingEntryError([key]) from None

    def spec(self) -> SearchSpaceSpec:
        return SearchSpaceSpec.named(self.kind, self.compat_mode)

    def export(self, path) -> Path:
        path = Path(path)
        with path.open('w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(['genome', 'accuracy'])
            for genome, acc in sorted(self.entries.items()):
                writer.writerow([genome, repr(float(acc))])
        return path


def _key(genome) -> str:
    return genome.to_string() if isinstance(genome, Genome) else str(genome)


def load_table(path, compat_mode: bool = True) -> BenchmarkTable:
    """Read a ``genome,accuracy`` CSV; every genome must be valid in one space."""
    path = Path(path)
    name = str(path)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise TableParseError(name, 0, 'file not found') from None
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise EmptyTableError(f"{name}: table is empty")
    header = [cell.strip() for cell in rows[0]]
    if header != ['genome', 'accuracy']:
        raise TableParseError(name, 1, f"expected header 'genome,accuracy', got {','.join(header)!r}")

    entries: Dict[str, float] = {}
    spec: Optional[SearchSpaceSpec] = None
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise TableParseError(name, line, f"expected 2 columns, got {len(row)}")
        try:
            genome = Genome.from_string(row[0])
        except EncodingError as e:
            raise TableParseError(name, line, str(e)) from None
        if spec is None:
            if genome.kind == 'vector':
                raise TableParseError(name, line, 'tables hold micro or macro genomes')
            spec = SearchSpaceSpec.named(genome.kind, compat_mode and genome.kind == 'micro')
        problems = spec.violations(genome)
        if problems:
            pos, reason = problems[0]
            raise TableParseError(name, line, f"invalid genome at gene {pos}: {reason}")
        try:
            acc = float(row[1])
        except ValueError:
            raise TableParseError(name, line, f"accuracy is not a number: {row[1]!r}") from None
        if not 0.0 <= acc <= 1.0:
            raise TableParseError(name, line, f"accuracy {acc} outside [0, 1]")
        key = genome.to_string()
        if key in entries:
            raise TableParseError(name, line, f"duplicate genome {key}")
        entries[key] = acc

    if spec is None:
        raise EmptyTableError(f"{name}: table has no rows")
    logger.info(f"Loaded {len(entries)} entries from {name}")
    return BenchmarkTable(entries, spec.kind, spec.compat_mode)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise UndefinedCorrelationError(f"need two equal-length sequences, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise UndefinedCorrelationError(f"need at least 2 points, got {len(x)}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError('ranks have zero variance')
    rho = spearmanr(x, y)[0]
    return float(np.clip(rho, -1.0, 1.0))


# --- estimators ---------------------------------------------------------------

class Scored(NamedTuple):
    score: float                        # higher is better
    flops_m: float
    report: Optional[EvalReport] = None


class Estimator:
    name = 'estimator'

    def __init__(self, scale: ScaleConfig):
        self.scale = scale

    def structure(self, genome: Genome) -> Tuple[int, int]:
        net = decode(genome, self.scale)
        return count_flops(net), count_params(net)

    def score(self, genome: Genome, seed: int) -> Scored:
        raise NotImplementedError


class TableAccuracy(Estimator):
    name = 'table'
    sign = 1.0

    def __init__(self, scale: ScaleConfig, table: BenchmarkTable):
        super().__init__(scale)
        self.table = table

    def score(self, genome: Genome, seed: int) -> Scored:
        flops, _ = self.structure(genome)
        return Scored(self.sign * self.table.accuracy(genome), flops / 1e6)


class NegatedTableAccuracy(TableAccuracy):
    name = 'neg_table'
    sign = -1.0


class NegFlops(Estimator):
    name = 'neg_flops'

    def score(self, genome: Genome, seed: int) -> Scored:
        flops, _ = self.structure(genome)
        return Scored(-flops / 1e6, flops / 1e6)


class NegParams(Estimator):
    name = 'neg_params'

    def score(self, genome: Genome, seed: int) -> Scored:
        flops, params = self.structure(genome)
        return Scored(-params / 1e6, flops / 1e6)


class UniformNoise(Estimator):
    name = 'noise'

    def score(self, genome: Genome, seed: int) -> Scored:
        flops, _ = self.structure(genome)
        rng = np.random.default_rng(derive_seed(seed, 'noise'))
        return Scored(float(rng.random()), flops / 1e6)


class RweEstimator(Estimator):
    """Negated RWE error, optionally with a different backbone initialization."""

    def __init__(self, scale: ScaleConfig, data: ImageDataset, cfg: RweConfig, scheme: Optional[str] = None):
        super().__init__(scale)
        self.data = data
        self.cfg = cfg if scheme is None else cfg.model_copy(update={'init_scheme': scheme})
        self.name = 'rwe' if scheme is None else f'rwe:{scheme}'

    def score(self, genome: Genome, seed: int) -> Scored:
        report = evaluate_rwe(genome, self.scale, self.data, self.cfg, seed=seed)
        return Scored(-report.rwe_error, report.flops_m, report)


ESTIMATORS = ('table', 'neg_table', 'rwe', 'rwe:<scheme>', 'neg_flops', 'neg_params', 'noise')


def build_estimator(name: str, scale: ScaleConfig, table: Optional[BenchmarkTable] = None,
                    data: Optional[ImageDataset] = None, rwe_cfg: Optional[RweConfig] = None) -> Estimator:
    """Estimator by registry name, e.g. ``rwe``, ``rwe:xavier_uniform`` or ``neg_flops``."""
    base, _, scheme = name.partition(':')
    if base in ('table', 'neg_table'):
        if table is None:
            raise ConfigError(f"estimator '{name}' needs a benchmark table", ['ablation.estimators'])
        cls = TableAccuracy if base == 'table' else NegatedTableAccuracy
        return cls(scale, table)
    if base == 'rwe':
        if data is None:
            raise ConfigError(f"estimator '{name}' needs a dataset", ['ablation.estimators'])
        cfg = rwe_cfg or RweConfig()
        if scheme and scheme not in SCHEMES:
            raise ConfigError(f"unknown initialization scheme '{scheme}' (known: {', '.join(SCHEMES)})",
                              ['ablation.estimators'])
        return RweEstimator(scale_for(data, scale), data, cfg, scheme or None)
    simple = {'neg_flops': NegFlops, 'neg_params': NegParams, 'noise': UniformNoise}
    if base in simple and not scheme:
        return simple[base](scale)
    raise ConfigError(f"unknown estimator '{name}' (known: {', '.join(ESTIMATORS)})", ['ablation.estimators'])


class EstimatorEvaluator:
    """Search backend minimizing (-score, MFLOPs) of an estimator."""

    reference_point = None
    objective_names = ('neg_score', 'flops_m')

    def __init__(self, estimator: Estimator, spec: SearchSpaceSpec, allow_missing: bool = False):
        self.estimator = estimator
        self.spec = spec
        self.allow_missing = allow_missing

    def evaluate(self, genome: Genome, seed: int) -> Evaluation:
        try:
            scored = self.estimator.score(genome, seed)
        except MissingEntryError as e:
            if not self.allow_missing:
                raise
            raise EvaluationError(genome.to_string(), e) from e
        return Evaluation((-scored.score, scored.flops_m), scored.report)


class BenchmarkEvaluator:
    """Search backend minimizing (1 - table accuracy, MFLOPs)."""

    reference_point = None
    objective_names = ('error', 'flops_m')

    def __init__(self, table: BenchmarkTable, scale: ScaleConfig, spec: Optional[SearchSpaceSpec] = None):
        self.table = table
        self.scale = scale
        self.spec = spec or table.spec()

    def evaluate(self, genome: Genome, seed: int) -> Evaluation:
        try:
            accuracy = self.table.accuracy(genome)
        except MissingEntryError as e:
            raise EvaluationError(genome.to_string(), e) from e
        flops = count_flops(decode(genome, self.scale))
        return Evaluation((1.0 - accuracy, flops / 1e6))


# --- ablation -----------------------------------------------------------------

@dataclass
class CorrelationTrace:
    estimator: str
    trial: int
    seed: int
    rhos: List[Optional[float]] = field(default_factory=list)
    n_points: List[int] = field(default_factory=list)
    n_missing: List[int] = field(default_factory=list)

    def rows(self) -> List[TraceRow]:
        return [
            TraceRow(estimator=self.estimator, trial=self.trial, generation=gen, rho=rho,
                     n_points=n, n_missing=m, seed=self.seed)
            for gen, (rho, n, m) in enumerate(zip(self.rhos, self.n_points, self.n_missing))
        ]


class CorrelationPipeline(SearchPipeline):
    """Correlates the estimator's scores with the table over each generation's union."""

    def __init__(self, trace: CorrelationTrace, table: BenchmarkTable, allow_missing: bool = False):
        self.trace = trace
        self.table = table
        self.allow_missing = allow_missing

    def process_generation(self, record: GenerationRecord, search: EvolutionarySearch) -> None:
        scores, accuracies, missing = [], [], []
        for ind in record.individuals:
            if ind.genome not in self.table:
                missing.append(ind.genome)
                continue
            if ind.failed:
                continue
            scores.append(-ind.objectives[0])
            accuracies.append(self.table.accuracy(ind.genome))
        if missing and not self.allow_missing:
            raise MissingEntryError(missing)

        try:
            rho = spearman(scores, accuracies)
        except UndefinedCorrelationError as e:
            logger.warning(f"{self.trace.estimator} trial {self.trace.trial} generation "
                           f"{record.generation}: {e}")
            rho = None
        self.trace.rhos.append(rho)
        self.trace.n_points.append(len(scores))
        self.trace.n_missing.append(len(set(missing)))


def trial_seed(run_seed: int, trial: int) -> int:
    return derive_seed(run_seed, 'trial', trial)


def _run_trial(cfg: RunConfig, estimator: Estimator, table: BenchmarkTable, trial: int,
               workers: int = 1) -> CorrelationTrace:
    seed = trial_seed(cfg.seed, trial)
    spec = table.spec()
    search_cfg = cfg.search.model_copy(update={
        'max_gen': cfg.ablation.generations,
        'space': table.kind,
        'compat_mode': spec.compat_mode,
    })
    trace = CorrelationTrace(estimator.name, trial, seed)
    evaluator = EstimatorEvaluator(estimator, spec, cfg.ablation.allow_missing)
    pipeline = CorrelationPipeline(trace, table, cfg.ablation.allow_missing)
    EvolutionarySearch(search_cfg, evaluator, seed=seed, workers=workers, pipelines=[pipeline]).run()
    return trace


def run_ablation(cfg: RunConfig, estimators: Sequence[Estimator], table: BenchmarkTable,
                 workers: int = 1,
                 on_trace: Optional[Callable[[CorrelationTrace], None]] = None) -> List[CorrelationTrace]:
    """One correlation trace per estimator and trial, ordered by estimator then trial.

    Trial ``t`` uses the same seed for every estimator, so all estimators start
    from the same initial population.
    """
    if table.kind == 'micro' and not table.compat_mode:
        logger.warning('Ablation table was loaded without compat mode; duplicate inputs may be missing')
    jobs = [(est, t) for est in estimators for t in range(cfg.ablation.trials)]
    traces: List[CorrelationTrace] = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, cfg, est, table, t) for est, t in jobs]
            for future in futures:
                traces.append(future.result())
                if on_trace:
                    on_trace(traces[-1])
    else:
        for est, t in jobs:
            traces.append(_run_trial(cfg, est, table, t))
            if on_trace:
                on_trace(traces[-1])
    return traces


def summarize(traces: Sequence[CorrelationTrace]) -> Dict[str, List[Tuple[float, float]]]:
    """Per estimator, the (mean, std) of rho over trials at every generation.

    Undefined correlations are left out; a generation where every trial is
    undefined gets ``(nan, nan)``.
    """
    grouped: Dict[str, List[CorrelationTrace]] = {}
    for trace in traces:
        grouped.setdefault(trace.estimator, []).append(trace)
    summary = {}
    for name, group in grouped.items():
        generations = max(len(t.rhos) for t in group)
        stats = []
        for gen in range(generations):
            values = [t.rhos[gen] for t in group if gen < len(t.rhos) and t.rhos[gen] is not None]
            if values:
                stats.append((float(np.mean(values)), float(np.std(values))))
            else:
                stats.append((math.nan, math.nan))
        summary[name] = stats
    return summary


def write_trace(path, traces: Sequence[CorrelationTrace]) -> Path:
    """CSV with columns estimator, trial, generation, rho (empty when undefined)."""
    path = Path(path)
    with path.open('w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['estimator', 'trial', 'generation', 'rho', 'n_points', 'n_missing'])
        for trace in traces:
            for row in trace.rows():
                writer.writerow([row.estimator, row.trial, row.generation,
                                 '' if row.rho is None else repr(row.rho), row.n_points, row.n_missing])
    return path
