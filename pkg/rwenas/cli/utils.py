"""
CLI utilities and helpers
"""

import logging
from pathlib import Path

from rich.logging import RichHandler

from .. import settings
from ..errors import EncodingError
from ..genome import Genome, SearchSpaceSpec
from .progress import console


def setup_logging(verbose: bool = False) -> None:
    """Route every rwenas logger through one Rich handler on stderr."""
    level = logging.INFO if verbose else getattr(logging, settings.LOG_LEVEL)
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
    root = logging.getLogger('rwenas')
    for old in list(root.handlers):
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


def ensure_output_dir(output_dir: str) -> Path:
    """Ensure output directory exists and is writable"""
    path = Path(output_dir).expanduser().resolve()
    path.mkdir(parents=True, exist_ok=True)
    return path


def parse_genome(text: str, compat_mode: bool = False) -> Genome:
    """Genome from its text form, checked against the default space of its kind."""
    genome = Genome.from_string(text)
    if genome.kind == 'vector':
        return genome
    spec = SearchSpaceSpec.named(genome.kind, compat_mode and genome.kind == 'micro')
    problems = spec.violations(genome)
    if problems:
        pos, reason = problems[0]
        raise EncodingError(f"gene {pos} of {text!r}: {reason}")
    return genome
