import csv
from pathlib import Path
from typing import Dict, List, Tuple

from rich.console import Console
from rich.table import Table

from config import Config
from src.models import CellMetrics, TrialRecord

console = Console()

SUMMARY_COLUMNS = [
    "schema_version", "ensemble", "n", "N", "density", "algorithm", "k",
    "trials", "successes", "errors", "success_rate", "mean_wall_time_s",
]

CellKey = Tuple[str, int, int, float, str, int]


class RunTracker:
    """Track per-cell success counts and recovery times during a sweep"""

    def __init__(self, timed: bool = True):
        self.cells: Dict[CellKey, CellMetrics] = {}
        self.timed = timed

    def record(self, record: TrialRecord) -> CellMetrics:
        """Fold one trial into its (shape, density, algorithm, k) cell"""
        key = (record.ensemble, record.n, record.N, record.density, record.algorithm.value, record.k)
        cell = self.cells.get(key)
        if cell is None:
            cell = CellMetrics(
                ensemble=record.ensemble,
                n=record.n,
                N=record.N,
                density=record.density,
                algorithm=record.algorithm,
                k=record.k,
                timed=self.timed,
            )
            self.cells[key] = cell
        cell.trials += 1
        cell.successes += record.success
        if record.halt_reason.startswith("error:"):
            cell.errors += 1
        if record.wall_time_s is not None:
            cell.total_wall_time_s += record.wall_time_s
        return cell

    def summary(self) -> List[CellMetrics]:
        """Cells in first-seen order"""
        return list(self.cells.values())

    def get_total_trials(self) -> int:
        return sum(c.trials for c in self.cells.values())

    def write_summary_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            for cell in self.summary():
                mean_time = cell.mean_wall_time_s
                writer.writerow([
                    Config.CSV_SCHEMA_VERSION,
                    cell.ensemble,
                    cell.n,
                    cell.N,
                    repr(cell.density),
                    cell.algorithm.value,
                    cell.k,
                    cell.trials,
                    cell.successes,
                    cell.errors,
                    repr(cell.success_rate),
                    "" if mean_time is None else repr(mean_time),
                ])
        return path

    def print_summary(self):
        """Print recovery summary table"""
        table = Table(title="Recovery Summary")

        table.add_column("Shape", style="cyan")
        table.add_column("Density", justify="right", style="magenta")
        table.add_column("Algorithm", style="magenta")
        table.add_column("k", justify="right")
        table.add_column("Success", justify="right", style="green")
        table.add_column("Mean time (s)", justify="right", style="yellow")

        for cell in self.summary():
            mean_time = cell.mean_wall_time_s
            table.add_row(
                f"{cell.ensemble} {cell.n}x{cell.N}",
                f"{cell.density:g}",
                cell.algorithm.value,
                str(cell.k),
                f"{cell.successes}/{cell.trials} ({100 * cell.success_rate:.0f}%)",
                "-" if mean_time is None else f"{mean_time:.4f}",
            )

        total = self.get_total_trials()
        errors = sum(c.errors for c in self.cells.values())
        table.add_section()
        table.add_row("[bold]TOTAL[/bold]", "", "", "", f"[bold]{total:,} trials[/bold]", "")

        console.print(table)

        if errors:
            console.print(f"[red]⚠️  {errors} trial(s) ended in an algorithm error; see halt_reason in the trial CSV[/red]")
        else:
            console.print(f"[green]✓ {total:,} trials recorded, no algorithm errors[/green]")
