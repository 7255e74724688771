"""
Exception hierarchy for rwenas.
"""

from typing import Iterable, List, Optional


class RwenasError(Exception):
    """Base class for every error raised by rwenas."""


class EncodingError(RwenasError):
    """Genome text is malformed or two genomes come from different spaces."""


class DecodeError(RwenasError):
    def __init__(self, message: str, gene: Optional[int] = None):
        super().__init__(message)
        self.gene = gene


class ShapeError(RwenasError):
    pass


class NonFiniteError(RwenasError):
    pass


class EvaluationError(RwenasError):
    def __init__(self, genome: str, cause: Exception):
        super().__init__(f"evaluation of {genome} failed: {cause}")
        self.genome = genome
        self.cause = cause


class DatasetError(RwenasError):
    pass


class TruncatedFileError(DatasetError):
    def __init__(self, path: str, offset: int):
        super().__init__(f"{path}: truncated record at byte offset {offset}")
        self.path = path
        self.offset = offset


class RecordCountError(DatasetError):
    pass


class TableError(RwenasError):
    pass


class EmptyTableError(TableError):
    pass


class TableParseError(TableError):
    def __init__(self, path: str, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line


class MissingEntryError(TableError):
    def __init__(self, genomes: Iterable[str]):
        self.genomes: List[str] = sorted(set(genomes))
        preview = ', '.join(self.genomes[:5])
        more = '...' if len(self.genomes) > 5 else ''
        super().__init__(f"{len(self.genomes)} genome(s) missing from table: {preview}{more}")


class UndefinedCorrelationError(RwenasError):
    pass


class ConfigError(RwenasError):
    def __init__(self, message: str, keys: Iterable[str] = ()):
        self.keys = list(keys)
        super().__init__(message)
