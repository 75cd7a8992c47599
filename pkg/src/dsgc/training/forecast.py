"""
Rolling one-step-ahead forecasting on sensor series.

A sample predicts ``series[t]`` at every node from the true window
``series[t - p:t]`` (missing values zero-filled), optionally followed by the
missing-mask of the latest observation. Time stamps are split 60/20/20 in
chronological order.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from dsgc.graph.spatial import NeighborGraph
from dsgc.models.builder import Model
from dsgc.training.loop import predict_split
from dsgc.training.metrics import rmse
from dsgc.training.tasks import SPLITS, TaskData, TaskKind
from dsgc.utils.error_handlers import DimensionError, ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

CHRONOLOGICAL_FRACTIONS = (0.6, 0.2, 0.2)


def chronological_bounds(steps: int, fractions: Tuple[float, float, float] = CHRONOLOGICAL_FRACTIONS) -> Dict[str, Tuple[int, int]]:
    """Half-open time ranges of the train, val and test periods."""
    train_end = int(round(fractions[0] * steps))
    val_end = int(round((fractions[0] + fractions[1]) * steps))
    return {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, steps)}


def _clean(series: np.ndarray, mask: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2:
        raise DimensionError("series must be time x nodes", shapes=[series.shape])
    if mask is None:
        mask = np.isfinite(series).astype(np.float64)
    else:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != series.shape:
            raise DimensionError("mask and series shapes differ", shapes=[mask.shape, series.shape])
        mask = np.where(np.isfinite(series), mask, 0.0)
    return np.where(mask > 0, np.nan_to_num(series), 0.0), mask


@dataclass(frozen=True)
class ForecastWindows:
    """Window samples: ``inputs`` S x n x (p [+1]), ``targets``/``target_mask`` S x n."""

    inputs: np.ndarray
    targets: np.ndarray
    target_mask: np.ndarray
    times: np.ndarray
    splits: Dict[str, np.ndarray]
    window: int
    with_mask: bool

    @classmethod
    def from_series(
        cls,
        series: np.ndarray,
        mask: Optional[np.ndarray] = None,
        window: int = 6,
        with_mask: bool = True,
    ) -> "ForecastWindows":
        if window < 1:
            raise ParameterError("forecast window must be at least 1", name="window", value=window)
        values, observed = _clean(series, mask)
        steps = values.shape[0]
        if steps <= window:
            raise ParameterError(
                f"series of {steps} steps is too short for window {window}", name="window", value=window
            )

        bounds = chronological_bounds(steps)
        skipped = {name: max(0, min(window, hi) - lo) for name, (lo, hi) in bounds.items()}
        for name, count in skipped.items():
            if count:
                logger.warning("forecast_windows_skipped", split=name, count=count, window=window)

        times = np.arange(window, steps)
        # Sliding view: windows[i] = values[times[i] - window : times[i]].
        lagged = np.stack([values[times - window + j] for j in range(window)], axis=-1)
        if with_mask:
            lagged = np.concatenate([lagged, observed[times - 1][:, :, None]], axis=-1)

        splits = {}
        for name in SPLITS:
            lo, hi = bounds[name]
            splits[name] = np.flatnonzero((times >= lo) & (times < hi))
        return cls(
            inputs=lagged,
            targets=values[times],
            target_mask=observed[times],
            times=times,
            splits=splits,
            window=window,
            with_mask=with_mask,
        )

    @property
    def channels(self) -> int:
        return int(self.inputs.shape[2])

    def to_task(self, graph: NeighborGraph) -> TaskData:
        return TaskData(
            kind=TaskKind.NODE_REGRESSION,
            graph=graph,
            inputs=self.inputs,
            targets=self.targets,
            splits=self.splits,
            target_mask=self.target_mask,
            metadata={"window": self.window, "with_mask": self.with_mask},
        )


def rolling_forecast_eval(
    model: Model,
    series: np.ndarray,
    window: int,
    mask: Optional[np.ndarray] = None,
    with_mask: bool = True,
    split: str = "test",
) -> float:
    """
    RMSE of one-step predictions over the time stamps of ``split`` and all
    nodes. Each prediction sees the true history, never the model's own output.
    """
    windows = ForecastWindows.from_series(series, mask, window, with_mask)
    data = windows.to_task(model.graphs[0])
    idx = windows.splits[split]
    if idx.size == 0:
        logger.warning("empty_forecast_split", split=split)
        return float("nan")
    pred = predict_split(model, data, idx)
    return rmse(pred, windows.targets[idx], windows.target_mask[idx])


def persistence_rmse(windows: ForecastWindows, split: str = "test") -> float:
    """Baseline that repeats the latest observed value (the last window channel)."""
    idx = windows.splits[split]
    if idx.size == 0:
        return float("nan")
    last = windows.inputs[idx, :, windows.window - 1]
    return rmse(last, windows.targets[idx], windows.target_mask[idx])
