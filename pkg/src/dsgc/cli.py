"""
Command-line interface.

    engine gen-sim --task shift --grid 8x8 --samples 2000 --seed 7 -o data.json
    engine train -c run.json --seeds 0,1,2
    engine gradcheck --layer dsgc
    engine report runs/shift

Exit codes: 0 success, 1 failed check or internal error, 2 configuration or
dataset error, 3 training divergence.
"""

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import typer
from rich.console import Console
from rich.table import Table

from dsgc.core.config import LogFormat, LogLevel, get_settings
from dsgc.core.tensor import precision_scope
from dsgc.data.datasets import dataset_to_task, load_dataset, save_dataset
from dsgc.data.documents import gen_synthetic_documents
from dsgc.data.schemas import DatasetKind
from dsgc.data.sensors import gen_synthetic_sensor_series
from dsgc.data.simulation import Boundary, SimKind, SimTask, gen_sim_dataset, gen_subsampled_grid
from dsgc.experiments.config import load_run_config
from dsgc.experiments.gradcheck import gradcheck_all, gradcheck_layer
from dsgc.experiments.reporting import collect_reports, gradcheck_table, summary_table
from dsgc.experiments.runner import run_experiment
from dsgc.models.builder import build_stack_for
from dsgc.models.serialization import load_model, read_manifest
from dsgc.models.specs import LayerKind
from dsgc.training.forecast import ForecastWindows, persistence_rmse, rolling_forecast_eval
from dsgc.training.loop import METRIC_NAMES, evaluate
from dsgc.training.reports import summarize_reports
from dsgc.training.tasks import SPLITS
from dsgc.utils.error_handlers import cli_error_boundary
from dsgc.utils.logging import configure_logging, get_logger

app = typer.Typer(
    name="engine",
    help="Depthwise separable graph convolution engine: datasets, training and checks.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
logger = get_logger(__name__)


def _parse_grid(value: str) -> Tuple[int, int]:
    try:
        h, w = (int(part) for part in value.lower().split("x"))
    except ValueError as exc:
        raise typer.BadParameter(f"expected HxW, got {value!r}") from exc
    if h < 1 or w < 1:
        raise typer.BadParameter("grid sides must be positive")
    return h, w


def _parse_seeds(value: str) -> List[int]:
    try:
        seeds = [int(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"expected comma-separated integers, got {value!r}") from exc
    if not seeds:
        raise typer.BadParameter("give at least one seed")
    if len(set(seeds)) != len(seeds):
        raise typer.BadParameter("seeds must be distinct")
    return seeds


def _wrote(path: Path, what: str) -> None:
    console.print(f"[green]wrote[/green] {what} to {path}")


@app.callback()
def main(
    log_level: Optional[LogLevel] = typer.Option(None, "--log-level", help="Overrides ENGINE_LOG_LEVEL"),
    log_format: Optional[LogFormat] = typer.Option(None, "--log-format", help="Overrides ENGINE_LOG_FORMAT"),
) -> None:
    settings = get_settings()
    configure_logging((log_level or settings.log_level).value, (log_format or settings.log_format).value)


# ==================== DATASETS ====================

@app.command("gen-sim")
@cli_error_boundary
def gen_sim(
    task: SimKind = typer.Option(..., "--task", help="shift, rotation or flip"),
    grid: str = typer.Option("8x8", "--grid", help="Grid size HxW"),
    samples: int = typer.Option(2000, "--samples", min=1),
    seed: int = typer.Option(0, "--seed"),
    density: float = typer.Option(0.3, "--density", help="Probability a node is active"),
    boundary: Boundary = typer.Option(Boundary.WRAP, "--boundary", help="Shift boundary handling"),
    output: Path = typer.Option(..., "-o", "--output"),
) -> None:
    """Binary grid signals with their shifted, rotated or flipped targets."""
    height, width = _parse_grid(grid)
    sim = SimTask(kind=task, height=height, width=width, samples=samples, seed=seed, density=density, boundary=boundary)
    _wrote(save_dataset(gen_sim_dataset(sim), output), f"{task.value} dataset")


@app.command("gen-grid")
@cli_error_boundary
def gen_grid(
    grid: str = typer.Option("32x32", "--grid"),
    keep: float = typer.Option(0.25, "--keep", help="Fraction of pixels kept as nodes"),
    samples: int = typer.Option(1000, "--samples", min=1),
    classes: int = typer.Option(4, "--classes"),
    k: int = typer.Option(16, "--k", help="Neighbourhood size of the node graph"),
    seed: int = typer.Option(0, "--seed"),
    output: Path = typer.Option(..., "-o", "--output"),
) -> None:
    """Subsampled-grid pattern classification with one shared pixel mask."""
    height, width = _parse_grid(grid)
    dataset = gen_subsampled_grid(height, width, keep=keep, samples=samples, classes=classes, seed=seed, k=k)
    _wrote(save_dataset(dataset, output), f"{dataset.graph.n}-node grid dataset")


@app.command("gen-series")
@cli_error_boundary
def gen_series(
    sensors: int = typer.Option(50, "--sensors", min=1),
    steps: int = typer.Option(2000, "--steps", min=2),
    missing: float = typer.Option(0.1, "--missing", help="Fraction of deleted readings"),
    k: int = typer.Option(9, "--k"),
    seed: int = typer.Option(0, "--seed"),
    output: Path = typer.Option(..., "-o", "--output"),
) -> None:
    """Spatially correlated sensor series with a missing-value mask."""
    dataset = gen_synthetic_sensor_series(sensors, steps, missing, seed=seed, k=k)
    _wrote(save_dataset(dataset, output), "sensor series")


@app.command("gen-docs")
@cli_error_boundary
def gen_docs(
    vocab: int = typer.Option(200, "--vocab", min=2),
    docs: int = typer.Option(1000, "--docs", min=1),
    classes: int = typer.Option(4, "--classes"),
    words: int = typer.Option(50, "--words", help="Words drawn per document"),
    k: int = typer.Option(9, "--k"),
    seed: int = typer.Option(0, "--seed"),
    output: Path = typer.Option(..., "-o", "--output"),
) -> None:
    """Bag-of-words documents on a word-embedding graph."""
    dataset = gen_synthetic_documents(vocab, docs, classes, seed=seed, words_per_doc=words, k=k)
    _wrote(save_dataset(dataset, output), "document dataset")


# ==================== TRAINING ====================

@app.command("train")
@cli_error_boundary
def train(
    config: Path = typer.Option(..., "-c", "--config", help="Run config JSON"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", help="Overrides the config's output_dir"),
    parallel: Optional[int] = typer.Option(None, "--parallel", min=1, help="Worker threads for independent runs"),
    seeds: Optional[str] = typer.Option(None, "--seeds", help="Comma-separated seeds; overrides the config's seeds"),
) -> None:
    """Train every (model, seed) pair of a run config and write reports."""
    seed_list = _parse_seeds(seeds) if seeds is not None else None
    cfg = load_run_config(config)
    if parallel is not None:
        cfg = cfg.model_copy(update={"parallel": parallel})
    if seed_list is not None:
        cfg = cfg.model_copy(update={"seeds": seed_list})
    reports = run_experiment(cfg, output_dir=output_dir)
    console.print(summary_table(summarize_reports(reports), metric=reports[0].metric))


@app.command("eval")
@cli_error_boundary
def eval_model(
    model_dir: Path = typer.Option(..., "--model", help="Directory holding model.json and model.npz"),
    dataset_path: Path = typer.Option(..., "--dataset"),
    split: str = typer.Option("test", "--split"),
    window: int = typer.Option(6, "--window", help="Forecast window for series datasets"),
    with_mask: bool = typer.Option(True, "--mask/--no-mask", help="Missing-mask input channel"),
) -> None:
    """Evaluate a saved model on one split of a dataset."""
    if split not in SPLITS:
        raise typer.BadParameter(f"split must be one of {', '.join(SPLITS)}")
    dataset = load_dataset(dataset_path)
    task = dataset_to_task(dataset, window=window, with_mask=with_mask)
    spec, seed = read_manifest(model_dir)
    settings = get_settings()
    precision = settings.precision.value if settings.precision is not None else "f32"
    table = Table(title=f"{model_dir} on {dataset_path} ({split})")
    table.add_column("metric", style="cyan")
    table.add_column("value", justify="right")
    with precision_scope(precision):
        model = load_model(model_dir, build_stack_for(spec, task.graph, seed=seed))
        if dataset.kind is DatasetKind.SERIES:
            series, mask = np.asarray(dataset.series), np.asarray(dataset.mask)
            value = rolling_forecast_eval(model, series, window, mask, with_mask, split=split)
            baseline = persistence_rmse(ForecastWindows.from_series(series, mask, window, with_mask), split)
            table.add_row("rolling rmse", f"{value:.6f}")
            table.add_row("persistence rmse", f"{baseline:.6f}")
        else:
            value = evaluate(model, task, task.splits[split])
            table.add_row(METRIC_NAMES[task.kind], f"{value:.6f}")
    console.print(table)


# ==================== CHECKS & REPORTS ====================

@app.command("gradcheck")
@cli_error_boundary
def gradcheck(
    layer: str = typer.Option("all", "--layer", help="Layer kind or 'all'"),
    in_channels: int = typer.Option(3, "--in", min=1),
    out_channels: int = typer.Option(4, "--out", min=1),
    groups: int = typer.Option(2, "--groups", min=1),
    nodes: int = typer.Option(12, "--nodes", min=2),
    order: int = typer.Option(3, "--order", min=1, help="Chebyshev order"),
    kernels: int = typer.Option(2, "--kernels", min=1, help="MoNet kernels"),
    gat: bool = typer.Option(False, "--gat", help="Neighbourhood-normalized MoNet"),
    seed: int = typer.Option(0, "--seed"),
) -> None:
    """Finite-difference gradient check; exits 1 if any group exceeds 1e-4 relative error."""
    if layer == "all":
        results = gradcheck_all(seed=seed)
    else:
        try:
            kind = LayerKind(layer)
        except ValueError as exc:
            raise typer.BadParameter(f"unknown layer kind {layer!r}") from exc
        label = f"{kind.value}_gat" if gat else kind.value
        results = {
            label: gradcheck_layer(
                kind,
                in_channels=in_channels,
                out_channels=out_channels,
                groups=groups,
                nodes=nodes,
                order=order,
                kernels=kernels,
                gat_normalize=gat,
                seed=seed,
            )
        }
    console.print(gradcheck_table(results))
    if not all(check.passed for checks in results.values() for check in checks):
        raise typer.Exit(code=1)


@app.command("report")
@cli_error_boundary
def report(
    run_dir: Path = typer.Argument(..., help="Output directory of a training run"),
    csv: Optional[Path] = typer.Option(None, "--csv", help="Also write the summary as CSV"),
) -> None:
    """Mean ± std summary of every report under a run directory."""
    reports = collect_reports(run_dir)
    baseline = "persistence_rmse" if any("persistence_rmse" in r.extras for r in reports) else None
    frame = summarize_reports(reports, baseline=baseline)
    console.print(summary_table(frame, metric=reports[0].metric))
    if csv is not None:
        frame.to_csv(csv, index=False, float_format="%.10g")
        _wrote(csv, "summary")


if __name__ == "__main__":
    app()
