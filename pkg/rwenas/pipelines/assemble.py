"""
Pipelines that stream search results to the run directory.

Records are written as they arrive so a run interrupted halfway still leaves
every finished generation on disk.
"""

import csv
import logging
from pathlib import Path
from typing import IO, Optional

from .. import settings
from ..items import GenerationRecord
from ..moea.search import EvolutionarySearch, SearchPipeline, SearchResult

logger = logging.getLogger(__name__)


class _LineWriter(SearchPipeline):
    filename = ''

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.path = self.output_dir / self.filename
        self.lines_written = 0
        self._file: Optional[IO[str]] = None

    def open_search(self, search: EvolutionarySearch) -> None:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self._file = self.path.open('w', encoding='utf-8')

    def write(self, line: str) -> None:
        try:
            self._file.write(line + '\n')
            self._file.flush()
            self.lines_written += 1
        except OSError as e:
            logger.error(f"Failed to write {self.path}: {e}")

    def close_search(self, result: SearchResult, search: EvolutionarySearch) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None
        logger.info(f"Wrote {self.lines_written} records to {self.path}")


class GenerationLogPipeline(_LineWriter):
    """One JSON line per generation: the parents-plus-offspring union with ranks."""

    filename = settings.GENERATION_LOG_FILE

    def process_generation(self, record: GenerationRecord, search: EvolutionarySearch) -> None:
        self.write(record.model_dump_json())


class EvaluationLogPipeline(_LineWriter):
    """One JSON line per genome evaluated for the first time."""

    filename = settings.EVALUATION_LOG_FILE

    def __init__(self, output_dir, include_timing: bool = False):
        super().__init__(output_dir)
        self.include_timing = include_timing

    def process_generation(self, record: GenerationRecord, search: EvolutionarySearch) -> None:
        for report in search.new_reports:
            self.write(report.to_record(self.include_timing))


class FrontExportPipeline(SearchPipeline):
    """``front.csv`` with the final non-dominated, non-failed individuals."""

    def __init__(self, output_dir):
        self.path = Path(output_dir) / settings.FRONT_FILE

    def close_search(self, result: SearchResult, search: EvolutionarySearch) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open('w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            names = getattr(search.evaluator, 'objective_names', None) or ['f1', 'f2']
            writer.writerow(['genome', *names])
            for ind in result.front:
                writer.writerow([ind.genome.to_string()] + [repr(float(v)) for v in ind.objectives])
        logger.info(f"Front of {len(result.front)} individuals written to {self.path}")
