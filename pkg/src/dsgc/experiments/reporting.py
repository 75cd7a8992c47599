"""Collect run reports from disk and render them as tables."""

from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd
from rich.table import Table

from dsgc.experiments.gradcheck import GroupCheck
from dsgc.training.reports import TrainReport, format_mean_std
from dsgc.utils.error_handlers import DatasetError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)


def collect_reports(run_dir: Union[str, Path]) -> List[TrainReport]:
    """Every ``<name>/seed_<s>/report.json`` under ``run_dir``, sorted by model then seed."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise DatasetError(f"run directory not found: {run_dir}", metadata={"path": str(run_dir)})
    reports = [TrainReport.from_file(p) for p in sorted(run_dir.glob("*/seed_*/report.json"))]
    if not reports:
        raise DatasetError(f"no reports under {run_dir}", metadata={"path": str(run_dir)})
    logger.debug("reports_collected", path=str(run_dir), count=len(reports))
    return sorted(reports, key=lambda r: (r.model, r.seed))


def summary_table(frame: pd.DataFrame, metric: str = "test") -> Table:
    """Mean ± std per model over seeds."""
    table = Table(title=f"Results ({metric} metric, mean ± std over seeds)")
    table.add_column("model", style="cyan")
    table.add_column("seeds", justify="right")
    table.add_column("params", justify="right")
    table.add_column("final train loss", justify="right")
    table.add_column(metric, justify="right")
    extra = [c[: -len("_mean")] for c in frame.columns if c.endswith("_mean")]
    extra = [c for c in extra if c not in ("final_train_loss", "test_metric")]
    for name in extra:
        table.add_column(name, justify="right")
    for row in frame.to_dict(orient="records"):
        cells = [
            str(row["model"]),
            str(int(row["seeds"])),
            str(int(row["param_count"])),
            format_mean_std(row["final_train_loss_mean"], row["final_train_loss_std"]),
            format_mean_std(row["test_metric_mean"], row["test_metric_std"]),
        ]
        cells += [format_mean_std(row[f"{c}_mean"], row[f"{c}_std"]) for c in extra]
        table.add_row(*cells)
    return table


def gradcheck_table(results: Dict[str, Sequence[GroupCheck]]) -> Table:
    table = Table(title="Finite-difference gradient check")
    table.add_column("layer", style="cyan")
    table.add_column("group")
    table.add_column("size", justify="right")
    table.add_column("max abs err", justify="right")
    table.add_column("max rel err", justify="right")
    table.add_column("status")
    for layer, checks in results.items():
        for check in checks:
            status = "[green]pass[/green]" if check.passed else "[red]FAIL[/red]"
            table.add_row(
                layer,
                check.name,
                str(check.size),
                f"{check.max_abs_error:.3e}",
                f"{check.max_rel_error:.3e}",
                status,
            )
    return table
