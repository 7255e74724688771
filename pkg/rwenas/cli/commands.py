"""
CLI commands for rwenas
"""

import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import typer
from rich.panel import Panel

from .. import settings
from ..bench import BenchmarkEvaluator, build_estimator, load_table, run_ablation, summarize, write_trace
from ..config import RunConfig, load_config
from ..dataio import fetch_cifar10, load_dataset
from ..errors import ConfigError, EncodingError, RwenasError
from ..genome import SearchSpaceSpec
from ..moea import RweEvaluator, SchafferEvaluator, run_search
from ..netgraph import count_flops, count_params, decode, validate
from ..oracle import build_oracle_table, sample_genomes
from ..pipelines import default_pipelines
from ..rwe import evaluate_rwe
from ..seeds import derive_seed
from .progress import CLIProgressTracker, console
from .utils import ensure_output_dir, parse_genome

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


@dataclass
class GlobalOptions:
    config: Optional[str] = None
    seed: Optional[int] = None
    out: Optional[str] = None
    workers: Optional[int] = None
    verbose: bool = False
    progress: bool = True

    def run_config(self) -> RunConfig:
        cfg = load_config(self.config)
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"--workers must be at least 1, got {self.workers}", ['workers'])
        return cfg.with_overrides(seed=self.seed, output_dir=self.out, workers=self.workers)


@contextmanager
def handle_errors(tracker: Optional[CLIProgressTracker] = None):
    """Turn rwenas errors into a console message and the matching exit code."""
    tracker = tracker or CLIProgressTracker(enabled=False)
    try:
        yield tracker
    except (ConfigError, EncodingError) as e:
        tracker.show_error(str(e))
        raise typer.Exit(EXIT_USAGE)
    except RwenasError as e:
        logger.debug('Command failed', exc_info=True)
        tracker.show_error(str(e))
        raise typer.Exit(EXIT_RUNTIME)
    except KeyboardInterrupt:
        tracker.show_error('interrupted')
        raise typer.Exit(EXIT_RUNTIME)


def _build_evaluator(cfg: RunConfig):
    search = cfg.search
    if search.backend == 'schaffer':
        return SchafferEvaluator()
    spec = SearchSpaceSpec.named(search.space, search.compat_mode)
    if search.backend == 'benchmark':
        table = load_table(search.table_path, search.compat_mode)
        if table.kind != search.space:
            raise ConfigError(f"table holds {table.kind} genomes but search.space is {search.space}",
                              ['search.space', 'search.table_path'])
        return BenchmarkEvaluator(table, cfg.scale, spec)
    return RweEvaluator(spec, load_dataset(cfg.dataset), cfg.scale, cfg.rwe)


def search_command(opts: GlobalOptions) -> int:
    """Run the evolutionary search and write its logs and final front."""
    tracker = CLIProgressTracker(enabled=opts.progress)
    with handle_errors(tracker):
        cfg = opts.run_config()
        output_path = ensure_output_dir(cfg.output_dir)
        cfg.dump(output_path)

        panel = Panel(
            f"[bold]Space:[/bold] {cfg.search.space}{' (compat)' if cfg.search.compat_mode else ''}\n"
            f"[bold]Backend:[/bold] {cfg.search.backend}\n"
            f"[bold]Population:[/bold] {cfg.search.pop_size} x {cfg.search.max_gen} generations\n"
            f"[bold]Seed:[/bold] {cfg.seed}   [bold]Workers:[/bold] {cfg.workers}\n"
            f"[bold]Output:[/bold] {output_path}",
            title="[bold blue]📋 Search Configuration",
            border_style="blue",
            padding=(1, 2),
        )
        if opts.progress:
            console.print(panel)

        evaluator = _build_evaluator(cfg)
        result = run_search(cfg.search, evaluator, seed=cfg.seed, workers=cfg.workers,
                            pipelines=default_pipelines(output_path, tracker))

        summary = {
            '🧬 Generations:': cfg.search.max_gen,
            '🔬 Evaluations:': result.evaluations,
            '♻️  Cache hits:': result.cache_hits,
            '🏆 Front size:': len(result.front),
        }
        failed = sum(1 for ind in result.population if ind.failed)
        if failed:
            summary['⚠️  Failed in population:'] = failed
        if result.archive and result.archive[-1].hypervolume is not None:
            summary['📐 Hypervolume:'] = f"{result.archive[-1].hypervolume:.4f}"
        summary['📁 Output:'] = output_path
        tracker.complete(success=True, summary=summary if opts.progress else None, title='Search Completed')
    return EXIT_OK


def eval_command(genome_text: str, opts: GlobalOptions, include_timing: bool = False) -> int:
    """Print the evaluation report of one genome as a JSON line on stdout."""
    with handle_errors():
        cfg = opts.run_config()
        genome = parse_genome(genome_text, cfg.search.compat_mode)
        if genome.kind == 'vector':
            raise EncodingError('only micro and macro genomes can be evaluated with RWE')
        data = load_dataset(cfg.dataset)
        report = evaluate_rwe(genome, cfg.scale, data, cfg.rwe, seed=derive_seed(cfg.seed, genome.digest()))
        typer.echo(report.to_record(include_timing))
    return EXIT_OK


def ablate_command(opts: GlobalOptions, table_path: Optional[str] = None,
                   estimators: Optional[List[str]] = None) -> int:
    """Correlate estimators with a benchmark table over search runs; writes the trace CSV."""
    tracker = CLIProgressTracker(enabled=opts.progress)
    with handle_errors(tracker):
        cfg = opts.run_config()
        table_path = table_path or cfg.search.table_path
        if not table_path:
            raise ConfigError('ablate needs a table: pass --table or set search.table_path', ['search.table_path'])
        names = list(estimators) if estimators else list(cfg.ablation.estimators)
        cfg = cfg.model_copy(update={
            'ablation': cfg.ablation.model_copy(update={'estimators': names}),
            'search': cfg.search.model_copy(update={'table_path': table_path}),
        })
        output_path = ensure_output_dir(cfg.output_dir)
        cfg.dump(output_path)

        table = load_table(table_path)
        data = load_dataset(cfg.dataset) if any(n.split(':')[0] == 'rwe' for n in names) else None
        built = [build_estimator(name, cfg.scale, table, data, cfg.rwe) for name in names]

        tracker.start_ablation(len(built) * cfg.ablation.trials)
        traces = run_ablation(cfg, built, table, workers=cfg.workers, on_trace=tracker.update_ablation)
        trace_path = write_trace(output_path / settings.TRACE_FILE, traces)

        summary = {}
        for name, stats in summarize(traces).items():
            mean, std = stats[-1] if stats else (float('nan'), float('nan'))
            summary[f"📈 {name} (last generation):"] = f"{mean:+.3f} ± {std:.3f}"
        summary['📁 Trace:'] = trace_path
        tracker.complete(success=True, summary=summary if opts.progress else None, title='Ablation Completed')
    return EXIT_OK


def describe_command(genome_text: str, opts: GlobalOptions) -> int:
    """Print the decoded graph with its FLOPs and parameter count as JSON on stdout."""
    with handle_errors():
        cfg = opts.run_config()
        genome = parse_genome(genome_text, cfg.search.compat_mode)
        net = decode(genome, cfg.scale)
        flops = count_flops(net)
        described = {
            'genome': genome.to_string(),
            'flops': flops,
            'flops_m': flops / 1e6,
            'params': count_params(net),
            'violations': validate(net),
            'graph': net.to_dict(),
        }
        typer.echo(json.dumps(described, indent=2))
    return EXIT_OK


def fetch_cifar10_command(dest: str, opts: GlobalOptions) -> int:
    """Download the CIFAR-10 binary batches into ``dest``."""
    tracker = CLIProgressTracker(enabled=opts.progress)
    with handle_errors(tracker):
        tracker.start_download(settings.CIFAR10_URL)
        target = fetch_cifar10(dest, on_progress=tracker.update_download)
        tracker.complete(success=True, summary={'📁 Batches:': Path(target)} if opts.progress else None,
                         title='CIFAR-10 Ready')
    return EXIT_OK


def oracle_command(opts: GlobalOptions, networks: Optional[int] = None) -> int:
    """Fully train random genomes and write their validation accuracies as a benchmark table."""
    tracker = CLIProgressTracker(enabled=opts.progress)
    with handle_errors(tracker):
        cfg = opts.run_config()
        if networks is not None:
            if networks < 2:
                raise ConfigError(f"--networks must be at least 2, got {networks}", ['oracle.networks'])
            cfg = cfg.model_copy(update={'oracle': cfg.oracle.model_copy(update={'networks': networks})})
        output_path = ensure_output_dir(cfg.output_dir)
        cfg.dump(output_path)

        spec = SearchSpaceSpec.named(cfg.search.space, cfg.search.compat_mode)
        genomes = sample_genomes(spec, cfg.oracle.networks, seed=cfg.seed)
        data = load_dataset(cfg.dataset)
        tracker.start_training(len(genomes))
        table = build_oracle_table(genomes, cfg.scale, data, cfg.oracle, seed=cfg.seed,
                                   compat_mode=cfg.search.compat_mode, on_trained=tracker.update_training)
        if len(table) < 2:
            raise RwenasError(f"only {len(table)} of {len(genomes)} reference trainings succeeded")
        table_path = table.export(output_path / settings.ORACLE_FILE)

        accuracies = list(table.entries.values())
        summary = {
            '🏋️  Trained:': f"{len(table)}/{len(genomes)}",
            '🎯 Accuracy range:': f"{min(accuracies):.3f} - {max(accuracies):.3f}",
            '📁 Table:': table_path,
        }
        tracker.complete(success=True, summary=summary if opts.progress else None, title='Reference Table Ready')
    return EXIT_OK
