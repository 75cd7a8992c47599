"""
Experiment orchestration: every (model, seed) pair of a run config is trained
on its own model and tape, and its artifacts are written under
``<output_dir>/<name>/seed_<seed>/``.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from dsgc.core.config import get_settings
from dsgc.core.tensor import precision_scope
from dsgc.data.datasets import dataset_to_task, load_dataset
from dsgc.data.schemas import DatasetFile, DatasetKind
from dsgc.experiments.config import ModelEntry, PresetName, RunConfig
from dsgc.models.builder import build_model, build_stack_for, spec_param_count
from dsgc.models.presets import (
    doc_classify_preset,
    grid_classify_preset,
    match_budget,
    sim_task_preset,
    ts_forecast_preset,
)
from dsgc.models.serialization import save_model
from dsgc.models.specs import ModelSpec
from dsgc.training.forecast import ForecastWindows, persistence_rmse
from dsgc.training.loop import train_loop
from dsgc.training.reports import TrainReport, summarize_reports, write_loss_curve
from dsgc.training.tasks import TaskData
from dsgc.utils.error_handlers import ConfigurationError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

REPORT_FILE = "report.json"
LOSS_CURVE_FILE = "loss_curve.csv"
SUMMARY_FILE = "summary.json"


@dataclass(frozen=True)
class RunJob:
    name: str
    spec: ModelSpec
    seed: int


def nodes_per_level(spec: ModelSpec, nodes: int) -> List[int]:
    return [nodes] + [p.clusters for p in spec.pools]


def preset_factory(
    entry: ModelEntry,
    dataset: DatasetFile,
    task: TaskData,
    cfg: RunConfig,
) -> Callable[[Optional[int]], ModelSpec]:
    """``make(width)`` for the entry's preset; ``None`` keeps the preset's own width."""
    options = dict(entry.options)
    op = entry.operator
    graph = task.graph

    if entry.preset is PresetName.SIM:
        grid = (int(dataset.metadata.get("height", 0)), int(dataset.metadata.get("width", 0)))
        if grid[0] * grid[1] != graph.n:
            grid = (graph.n, 1)

        def make_sim(width: Optional[int]) -> ModelSpec:
            kw = dict(options, width=width) if width is not None else dict(options)
            return sim_task_preset(op, grid=grid, **kw)

        return make_sim
    if entry.preset is PresetName.FORECAST:

        def make_forecast(width: Optional[int]) -> ModelSpec:
            kw = dict(options, width=width) if width is not None else dict(options)
            kw.setdefault("k", graph.k)
            return ts_forecast_preset(
                op, window=cfg.window, with_missing_mask=cfg.with_missing_mask, nodes=graph.n, **kw
            )

        return make_forecast
    if entry.preset is PresetName.GRID_CLASSIFY:

        def make_grid(width: Optional[int]) -> ModelSpec:
            kw = dict(options)
            if width is not None:
                stages = len(kw.get("ks", (16, 12)))
                kw["widths"] = tuple(width * 2 ** i for i in range(stages))
            return grid_classify_preset(
                op, nodes=graph.n, classes=task.classes, in_channels=task.channels, **kw
            )

        return make_grid

    def make_doc(width: Optional[int]) -> ModelSpec:
        kw = dict(options, width=width) if width is not None else dict(options)
        kw.setdefault("k", graph.k)
        return doc_classify_preset(op, classes=task.classes, **kw)

    return make_doc


def resolve_specs(cfg: RunConfig, dataset: DatasetFile, task: TaskData) -> Dict[str, ModelSpec]:
    """Model specs by name, with budget-matched widths resolved against earlier entries."""
    specs: Dict[str, ModelSpec] = {}
    n = task.graph.n
    for index, entry in enumerate(cfg.models):
        try:
            if entry.spec is not None:
                specs[entry.name] = entry.spec
                continue
            make = preset_factory(entry, dataset, task, cfg)
            if entry.match_budget_of is None:
                specs[entry.name] = make(None)
                continue
            reference = specs[entry.match_budget_of]
            target = spec_param_count(reference, nodes_per_level(reference, n))
            levels = nodes_per_level(make(1), n)
            specs[entry.name] = match_budget(make, target, levels)
        except (TypeError, ValidationError) as exc:
            raise ConfigurationError(f"model {entry.name!r}: bad preset options: {exc}") from exc
        logger.info(
            "model_spec_resolved",
            model=entry.name,
            params=spec_param_count(specs[entry.name], nodes_per_level(specs[entry.name], n)),
            index=index,
        )
    return specs


def run_job(job: RunJob, task: TaskData, cfg: RunConfig, precision: str, out_dir: Path) -> TrainReport:
    """Train one (model, seed) pair and write its artifacts."""
    with precision_scope(precision):
        stack = build_stack_for(job.spec, task.graph, seed=job.seed)
        model = build_model(job.spec, stack, seed=job.seed)
        train_cfg = cfg.train.model_copy(update={"precision": precision})
        report = train_loop(model, task, train_cfg, name=job.name, seed=job.seed)
        run_dir = out_dir / job.name / f"seed_{job.seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        save_model(model, run_dir)
    return report


def write_report(report: TrainReport, run_dir: Path) -> None:
    (run_dir / REPORT_FILE).write_text(report.to_json() + "\n", encoding="utf-8")
    write_loss_curve(report, run_dir / LOSS_CURVE_FILE)


def write_summary(reports: Sequence[TrainReport], out_dir: Path, baseline: Optional[str] = None) -> Path:
    frame = summarize_reports(reports, baseline=baseline)
    path = out_dir / SUMMARY_FILE
    records = json.loads(frame.to_json(orient="records", double_precision=15)) if not frame.empty else []
    path.write_text(json.dumps({"version": "v1", "models": records}, indent=2) + "\n", encoding="utf-8")
    return path


def run_experiment(cfg: RunConfig, output_dir: Optional[Path] = None) -> List[TrainReport]:
    """
    Train every (model, seed) pair, in config order. ``cfg.parallel`` > 1 runs
    pairs on worker threads (capped by ``ENGINE_MAX_PARALLEL``); reports keep
    config order either way.
    """
    settings = get_settings()
    precision = settings.precision.value if settings.precision is not None else cfg.train.precision
    out_dir = Path(output_dir or cfg.output_dir or settings.output_dir)
    dataset = load_dataset(cfg.dataset)
    task = dataset_to_task(dataset, window=cfg.window, with_mask=cfg.with_missing_mask)
    specs = resolve_specs(cfg, dataset, task)

    baseline: Optional[float] = None
    if dataset.kind is DatasetKind.SERIES:
        windows = ForecastWindows.from_series(
            np.asarray(dataset.series), np.asarray(dataset.mask), cfg.window, cfg.with_missing_mask
        )
        baseline = persistence_rmse(windows)

    jobs = [RunJob(entry.name, specs[entry.name], seed) for entry in cfg.models for seed in cfg.seeds]
    workers = min(cfg.parallel, settings.max_parallel, len(jobs))
    logger.info(
        "experiment_started",
        dataset=str(cfg.dataset),
        models=[e.name for e in cfg.models],
        seeds=cfg.seeds,
        precision=precision,
        workers=workers,
    )
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_job, job, task, cfg, precision, out_dir) for job in jobs]
            reports = [f.result() for f in futures]
    else:
        reports = [run_job(job, task, cfg, precision, out_dir) for job in jobs]

    for job, report in zip(jobs, reports):
        if baseline is not None:
            report.extras["persistence_rmse"] = baseline
        write_report(report, out_dir / job.name / f"seed_{job.seed}")
    summary = write_summary(reports, out_dir, baseline="persistence_rmse" if baseline is not None else None)
    logger.info("experiment_complete", runs=len(reports), summary=str(summary))
    return reports
