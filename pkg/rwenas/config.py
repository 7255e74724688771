"""
Run configuration models.

A run config is a JSON object whose sections mirror the models below. Unknown keys
are rejected everywhere so typos never silently fall back to defaults.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import settings
from .errors import ConfigError

logger = logging.getLogger(__name__)

InitScheme = Literal['pytorch_default', 'kaiming_normal', 'kaiming_uniform', 'xavier_normal', 'xavier_uniform']


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class ScaleConfig(_Section):
    """Network size used when decoding a genome."""

    init_channels: Optional[int] = Field(None, gt=0)   # None: per-space default
    layers: int = Field(settings.MICRO_LAYERS, gt=0)
    phase_channels: Optional[List[int]] = None
    resolution: int = Field(settings.INPUT_RESOLUTION, gt=0)
    in_channels: int = Field(3, gt=0)
    num_classes: int = Field(settings.NUM_CLASSES, ge=2)
    op_order: Literal['relu_conv_bn', 'conv_bn_relu'] = settings.OP_ORDER

    @field_validator('resolution')
    @classmethod
    def _divisible_by_four(cls, value: int) -> int:
        if value % 4:
            raise ValueError('resolution must be divisible by 4 (two reductions)')
        return value

    @field_validator('phase_channels')
    @classmethod
    def _three_phases(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and (len(value) != settings.MACRO_PHASES or min(value) <= 0):
            raise ValueError(f'phase_channels needs {settings.MACRO_PHASES} positive entries')
        return value

    def channels_for(self, kind: str) -> int:
        if self.init_channels is not None:
            return self.init_channels
        return settings.MACRO_INIT_CHANNELS if kind == 'macro' else settings.MICRO_INIT_CHANNELS

    def macro_channels(self) -> List[int]:
        if self.phase_channels is not None:
            return list(self.phase_channels)
        base = self.channels_for('macro')
        return [base * 2 ** p for p in range(settings.MACRO_PHASES)]


class RweConfig(_Section):
    epochs: int = Field(settings.RWE_EPOCHS, ge=1)
    batch_size: int = Field(settings.RWE_BATCH_SIZE, ge=1)
    lr: float = Field(settings.RWE_LR, gt=0)
    momentum: float = Field(settings.RWE_MOMENTUM, ge=0, lt=1)
    folds: int = Field(settings.RWE_FOLDS, ge=1)
    norm_batch: int = Field(settings.RWE_NORM_BATCH, ge=2)
    loader_batch: int = Field(settings.RWE_LOADER_BATCH, ge=1)
    standardize_features: bool = settings.RWE_STANDARDIZE_FEATURES
    init_scheme: InitScheme = settings.INIT_SCHEME
    seed: int = 0


class OracleConfig(_Section):
    """Full training of reference networks (backbone and linear head together)."""

    networks: int = Field(settings.ORACLE_NETWORKS, ge=2)
    epochs: int = Field(settings.ORACLE_EPOCHS, ge=1)
    batch_size: int = Field(settings.ORACLE_BATCH_SIZE, ge=2)
    lr: float = Field(settings.ORACLE_LR, gt=0)
    momentum: float = Field(settings.ORACLE_MOMENTUM, ge=0, lt=1)
    weight_decay: float = Field(settings.ORACLE_WEIGHT_DECAY, ge=0)
    grad_clip: Optional[float] = Field(settings.ORACLE_GRAD_CLIP, gt=0)   # None: no clipping
    init_scheme: InitScheme = settings.INIT_SCHEME


class OperatorConfig(_Section):
    crossover_prob: float = Field(settings.CROSSOVER_PROB, ge=0, le=1)
    eta_m: float = Field(settings.MUTATION_ETA, gt=0)
    mutation_prob: Optional[float] = Field(None, ge=0, le=1)   # None: 1 / genome length


class SearchConfig(_Section):
    space: Literal['micro', 'macro'] = 'micro'
    compat_mode: bool = False
    pop_size: int = Field(settings.POP_SIZE, ge=2)
    max_gen: int = Field(settings.MAX_GEN, ge=0)
    operators: OperatorConfig = OperatorConfig()
    backend: Literal['rwe', 'benchmark', 'schaffer'] = 'rwe'
    table_path: Optional[str] = None

    @model_validator(mode='after')
    def _table_for_benchmark(self) -> 'SearchConfig':
        if self.backend == 'benchmark' and not self.table_path:
            raise ValueError('backend "benchmark" needs table_path')
        if self.compat_mode and self.space != 'micro':
            raise ValueError('compat_mode applies to the micro space only')
        return self


class DatasetConfig(_Section):
    source: Literal['synthetic', 'cifar10'] = 'synthetic'
    path: Optional[str] = None
    classes: int = Field(settings.SYNTH_CLASSES, ge=2)
    size: int = Field(settings.SYNTH_SIZE, ge=10)
    resolution: int = Field(settings.INPUT_RESOLUTION, gt=0)
    valid_fraction: float = Field(settings.VALID_FRACTION, gt=0, lt=1)
    seed: int = 0

    @model_validator(mode='after')
    def _path_for_cifar(self) -> 'DatasetConfig':
        if self.source == 'cifar10' and not self.path:
            raise ValueError('source "cifar10" needs path')
        return self


class AblationConfig(_Section):
    generations: int = Field(settings.ABLATION_GENERATIONS, ge=0)
    trials: int = Field(settings.ABLATION_TRIALS, ge=1)
    estimators: List[str] = list(settings.ABLATION_ESTIMATORS)
    allow_missing: bool = False


class RunConfig(_Section):
    seed: int = 0
    workers: int = Field(settings.WORKERS, ge=1)
    output_dir: str = settings.OUTPUT_DIR
    search: SearchConfig = SearchConfig()
    rwe: RweConfig = RweConfig()
    scale: ScaleConfig = ScaleConfig()
    dataset: DatasetConfig = DatasetConfig()
    ablation: AblationConfig = AblationConfig()
    oracle: OracleConfig = OracleConfig()

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                       workers: Optional[int] = None) -> 'RunConfig':
        updates = {}
        if seed is not None:
            updates['seed'] = seed
        if output_dir is not None:
            updates['output_dir'] = output_dir
        if workers is not None:
            updates['workers'] = workers
        return self.model_copy(update=updates) if updates else self

    def dump(self, directory: Path) -> Path:
        path = Path(directory) / settings.CONFIG_FILE
        path.write_text(self.model_dump_json(indent=2) + '\n', encoding='utf-8')
        return path


def _key_path(loc) -> str:
    return '.'.join(str(part) for part in loc) or '<root>'


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        keys = [_key_path(err['loc']) for err in e.errors()]
        details = '; '.join(f"{_key_path(err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid config: {details}", keys) from None


def load_config(path: Optional[str]) -> RunConfig:
    """Read a JSON run config; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    config_path = Path(path).expanduser()
    try:
        data = json.loads(config_path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {config_path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{config_path}:{e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{config_path}: top level must be an object")
    logger.info(f"Loaded config from {config_path}")
    return parse_config(data)
