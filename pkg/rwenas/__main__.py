#!/usr/bin/env python3
"""
rwenas CLI - multi-objective architecture search with random-weight evaluation
"""

import sys
from typing import List, Optional

import click
import typer

from . import __version__
from .cli.commands import (EXIT_USAGE, GlobalOptions, ablate_command, describe_command, eval_command,
                           fetch_cifar10_command, oracle_command, search_command)
from .cli.progress import console
from .cli.utils import setup_logging

app = typer.Typer(
    name="rwenas",
    help="🧬 Multi-objective architecture search with random-weight evaluation",
    add_completion=False,
)


@app.callback()
def main_options(
    ctx: typer.Context,
    config: Optional[str] = typer.Option(None, "--config", "-c", help="JSON run config"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Run seed (overrides the config)"),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Output directory (overrides the config)"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Evaluation processes (overrides the config)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress at INFO level"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No progress bars or summary panels"),
):
    setup_logging(verbose)
    ctx.obj = GlobalOptions(config, seed, out, workers, verbose, progress=not quiet)


@app.command()
def search(ctx: typer.Context):
    """
    🧬 Run the NSGA-II search

    Writes config.json, generations.jsonl, evaluations.jsonl and front.csv to the output directory.
    """
    search_command(ctx.obj)


@app.command("eval")
def evaluate(
    ctx: typer.Context,
    genome: str = typer.Argument(..., help="Genome text, e.g. micro:0,1,1,3,..."),
    timing: bool = typer.Option(False, "--timing", help="Include wall time in the report"),
):
    """🔬 Evaluate one genome with RWE and print the report"""
    eval_command(genome, ctx.obj, include_timing=timing)


@app.command()
def ablate(
    ctx: typer.Context,
    table: Optional[str] = typer.Option(None, "--table", "-t", help="genome,accuracy CSV"),
    estimator: Optional[List[str]] = typer.Option(None, "--estimator", "-e",
                                                  help="Estimator name, repeatable (rwe, rwe:<scheme>, "
                                                       "neg_flops, neg_params, noise, table, neg_table)"),
):
    """📈 Correlate estimators with a benchmark table along search runs"""
    ablate_command(ctx.obj, table, estimator)


@app.command()
def oracle(
    ctx: typer.Context,
    networks: Optional[int] = typer.Option(None, "--networks", "-n", help="Number of random genomes to train"),
):
    """
    🏋️  Fully train random genomes into a reference table

    Writes oracle.csv (genome,accuracy) to the output directory; use it with ablate --table.
    """
    oracle_command(ctx.obj, networks)


@app.command()
def describe(
    ctx: typer.Context,
    genome: str = typer.Argument(..., help="Genome text"),
):
    """🔎 Decode a genome and print its graph, FLOPs and parameter count"""
    describe_command(genome, ctx.obj)


@app.command("fetch-cifar10")
def fetch_cifar10(
    ctx: typer.Context,
    dest: str = typer.Argument("./data", help="Directory to download into"),
):
    """⬇️  Download the CIFAR-10 binary release"""
    fetch_cifar10_command(dest, ctx.obj)


@app.command()
def version():
    """Show version information"""
    console.print(f"🧬 [bold blue]rwenas v{__version__}[/bold blue]")


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point for the CLI; usage errors exit with 1, runtime errors with 2."""
    try:
        result = app(args=argv, standalone_mode=False)
    except click.UsageError as e:
        console.print(f"❌ [bold red]Error:[/bold red] {e.format_message()}")
        sys.exit(EXIT_USAGE)
    except (KeyboardInterrupt, click.Abort):
        console.print("\n👋 [yellow]Goodbye![/yellow]")
        sys.exit(EXIT_USAGE)
    code = result if isinstance(result, int) else 0
    sys.exit(code)


if __name__ == "__main__":
    main()
