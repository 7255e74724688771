"""
Rich-based progress display for CLI runs
"""

from typing import Optional

from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, DownloadColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

console = Console(stderr=True)


class CLIProgressTracker:
    """
    Shows one bar over the generations of a search, one per ablation or a
    download bar, then a summary panel.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.progress: Optional[Progress] = None
        self.task = None

        self.max_gen = 0
        self.generation = 0
        self.evaluations = 0
        self.front_size = 0
        self.failed = 0
        self.hypervolume: Optional[float] = None

    def _start(self, description: str, total: Optional[int], *columns):
        if not self.enabled:
            return
        if self.progress is None:
            self.progress = Progress(
                SpinnerColumn(),
                TextColumn("[bold blue]{task.description}"),
                BarColumn(),
                *(columns or (TaskProgressColumn(),)),
                console=console,
                transient=True,
            )
            self.progress.start()
        self.task = self.progress.add_task(description, total=total)

    def _update(self, **kwargs):
        if self.progress is not None and self.task is not None:
            self.progress.update(self.task, **kwargs)

    # search

    def start_search(self, max_gen: int, pop_size: int):
        self.max_gen = max_gen
        self._start(f"🧬 Evaluating initial population of {pop_size}...", max_gen + 1)

    def update_generation(self, generation: int, evaluations: int, front_size: int, failed: int,
                          hypervolume: Optional[float] = None):
        self.generation = generation
        self.evaluations = evaluations
        self.front_size = front_size
        self.failed = failed
        self.hypervolume = hypervolume
        self._update(
            completed=generation + 1,
            description=f"🧬 Generation {generation}/{self.max_gen}: {evaluations} evaluated, front {front_size}",
        )

    def finish_search(self, result):
        self.evaluations = result.evaluations
        self.front_size = len(result.front)

    # ablation

    def start_ablation(self, runs: int):
        self._start(f"📈 Running {runs} ablation searches...", runs)

    def update_ablation(self, trace):
        self._update(advance=1, description=f"📈 {trace.estimator} trial {trace.trial} done")

    # reference training

    def start_training(self, networks: int):
        self._start(f"🏋️  Training {networks} reference networks...", networks)

    def update_training(self, trained):
        self._update(advance=1, description=f"🏋️  {trained.genome}: accuracy {trained.accuracy:.3f}")

    # download

    def start_download(self, url: str):
        self._start(f"⬇️  {url}", None, DownloadColumn())

    def update_download(self, done: int, total: Optional[int]):
        self._update(completed=done, total=total)

    def complete(self, success: bool = True, summary: Optional[dict] = None, title: str = "Search Completed"):
        if self.progress is not None:
            self.progress.stop()
            self.progress = None
            self.task = None

        if success and summary:
            self._show_summary(summary, title)
        elif success:
            console.print(f"✅ [bold green]{title}![/bold green]")

    def _show_summary(self, summary: dict, title: str):
        table = Table(show_header=False, show_edge=False, pad_edge=False)
        table.add_column("", style="bold green")
        table.add_column("", style="white")
        for label, value in summary.items():
            table.add_row(label, str(value))

        panel = Panel(
            Align.center(table),
            title=f"[bold green]✨ {title}",
            border_style="green",
        )
        console.print(panel)

    def show_error(self, error: str):
        if self.progress is not None:
            self.progress.stop()
            self.progress = None
        console.print(f"❌ [bold red]Error:[/bold red] {error}")
