from .evaluators import Evaluation, Evaluator, RweEvaluator
from .metrics import hypervolume, pareto_front, pareto_mask
from .problems import SchafferEvaluator
from .search import EvolutionarySearch, SearchPipeline, SearchResult, run_search
from .selection import binary_tournament, make_offspring
from .sorting import (Individual, assign_rank_and_crowding, constrained_dominates, crowding_distance, dominates,
                      environmental_selection, nondominated_sort)
