"""
Evaluation backends. A backend maps a genome (and a per-genome seed) to an
objective vector; all objectives are minimized.
"""

from typing import NamedTuple, Optional, Protocol, Tuple

from ..config import RweConfig, ScaleConfig
from ..dataio import ImageDataset
from ..genome import Genome, SearchSpaceSpec
from ..items import EvalReport
from ..rwe import evaluate_rwe


class Evaluation(NamedTuple):
    objectives: Tuple[float, ...]
    report: Optional[EvalReport] = None


class Evaluator(Protocol):
    spec: SearchSpaceSpec
    reference_point: Optional[Tuple[float, ...]]
    objective_names: Tuple[str, ...]

    def evaluate(self, genome: Genome, seed: int) -> Evaluation:
        ...


class RweEvaluator:
    """(RWE error, MFLOPs) of a micro or macro genome."""

    reference_point = None
    objective_names = ('rwe_error', 'flops_m')

    def __init__(self, spec: SearchSpaceSpec, data: ImageDataset, scale: ScaleConfig, cfg: RweConfig):
        self.spec = spec
        self.data = data
        self.scale = scale
        self.cfg = cfg

    def evaluate(self, genome: Genome, seed: int) -> Evaluation:
        report = evaluate_rwe(genome, self.scale, self.data, self.cfg, seed=seed)
        return Evaluation((report.rwe_error, report.flops_m), report)
