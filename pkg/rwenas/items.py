"""
Records written to disk. Field names are the stable keys of the JSON-lines and
CSV outputs.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    genome: str
    rwe_error: float = Field(ge=0.0, le=1.0)
    flops: int = Field(ge=0)            # multiply-accumulates per image
    flops_m: float = Field(ge=0.0)
    params: int = Field(ge=0)
    feature_dim: int
    fold_errors: List[float]            # validation error of each ensemble member
    seed: int
    backbone_seed: int
    classifier_seed: int
    init_scheme: str
    degenerate: bool = False            # a training fold saw a single class
    wall_seconds: float = 0.0

    def to_record(self, include_timing: bool = False) -> str:
        """One JSON line; wall time is left out unless asked for so records stay reproducible."""
        exclude = None if include_timing else {'wall_seconds'}
        return self.model_dump_json(exclude=exclude)


class IndividualRecord(BaseModel):
    genome: str
    objectives: List[float]
    rank: int
    crowding: Optional[float]           # None encodes +infinity
    seed: int
    failed: bool = False
    offspring: bool = False


class GenerationRecord(BaseModel):
    generation: int
    hypervolume: Optional[float] = None
    individuals: List[IndividualRecord]


class TraceRow(BaseModel):
    estimator: str
    trial: int
    generation: int
    rho: Optional[float]                # None when the correlation is undefined
    n_points: int
    n_missing: int = 0
    seed: int
