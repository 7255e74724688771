from .assemble import EvaluationLogPipeline, FrontExportPipeline, GenerationLogPipeline
from .progress_tracker import ProgressTrackerPipeline


def default_pipelines(output_dir, progress=None):
    """Pipelines a CLI search run writes its outputs with, in call order."""
    pipelines = [
        GenerationLogPipeline(output_dir),
        EvaluationLogPipeline(output_dir),
        FrontExportPipeline(output_dir),
    ]
    if progress is not None:
        pipelines.append(ProgressTrackerPipeline(progress))
    return pipelines
