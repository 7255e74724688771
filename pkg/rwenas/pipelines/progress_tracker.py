import logging

from ..items import GenerationRecord
from ..moea.search import EvolutionarySearch, SearchPipeline, SearchResult

logger = logging.getLogger(__name__)


class ProgressTrackerPipeline(SearchPipeline):
    """
    Forwards search progress to a display callback (see ``rwenas.cli.progress``).

    The callback only needs the methods it cares about: ``start_search``,
    ``update_generation`` and ``finish_search``.
    """

    def __init__(self, callback):
        self.callback = callback

    def _notify(self, method: str, *args) -> None:
        handler = getattr(self.callback, method, None)
        if handler is not None:
            handler(*args)

    def open_search(self, search: EvolutionarySearch) -> None:
        self._notify('start_search', search.cfg.max_gen, search.cfg.pop_size)

    def process_generation(self, record: GenerationRecord, search: EvolutionarySearch) -> None:
        front_size = sum(1 for ind in record.individuals if ind.rank == 0 and not ind.failed)
        failed = sum(1 for ind in record.individuals if ind.failed)
        self._notify('update_generation', record.generation, search.evaluations,
                     front_size, failed, record.hypervolume)

    def close_search(self, result: SearchResult, search: EvolutionarySearch) -> None:
        self._notify('finish_search', result)
