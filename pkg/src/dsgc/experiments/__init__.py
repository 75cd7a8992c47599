"""Run configs, experiment orchestration, gradient checks and reporting."""

from dsgc.experiments.config import ModelEntry, PresetName, RunConfig, load_run_config, parse_run_config
from dsgc.experiments.gradcheck import GroupCheck, gradcheck_all, gradcheck_layer, numeric_gradient
from dsgc.experiments.reporting import collect_reports, gradcheck_table, summary_table
from dsgc.experiments.runner import resolve_specs, run_experiment, write_summary

__all__ = [
    "GroupCheck",
    "ModelEntry",
    "PresetName",
    "RunConfig",
    "collect_reports",
    "gradcheck_all",
    "gradcheck_layer",
    "gradcheck_table",
    "load_run_config",
    "numeric_gradient",
    "parse_run_config",
    "resolve_specs",
    "run_experiment",
    "summary_table",
    "write_summary",
]
