"""Losses, metrics, the epoch loop and the forecasting protocol."""

from dsgc.training.forecast import (
    ForecastWindows,
    chronological_bounds,
    persistence_rmse,
    rolling_forecast_eval,
)
from dsgc.training.loop import (
    PROTOCOLS,
    TrainConfig,
    TrainingProtocol,
    evaluate,
    predict_split,
    protocol_config,
    task_loss,
    train_loop,
)
from dsgc.training.losses import bce_loss, cross_entropy_loss, mse_loss
from dsgc.training.metrics import bce, error_rate, rmse
from dsgc.training.reports import (
    TrainReport,
    format_mean_std,
    loss_curve_frame,
    summarize_reports,
    write_loss_curve,
)
from dsgc.training.tasks import SPLITS, TaskData, TaskKind, check_splits, random_splits

__all__ = [
    "ForecastWindows",
    "PROTOCOLS",
    "SPLITS",
    "TaskData",
    "TaskKind",
    "TrainConfig",
    "TrainingProtocol",
    "TrainReport",
    "bce",
    "bce_loss",
    "check_splits",
    "chronological_bounds",
    "cross_entropy_loss",
    "error_rate",
    "evaluate",
    "format_mean_std",
    "loss_curve_frame",
    "mse_loss",
    "persistence_rmse",
    "predict_split",
    "protocol_config",
    "random_splits",
    "rmse",
    "rolling_forecast_eval",
    "summarize_reports",
    "task_loss",
    "train_loop",
    "write_loss_curve",
]
