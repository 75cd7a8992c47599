"""
Epoch loop with a multi-step learning-rate schedule and best-validation
checkpoint selection.
"""

import time
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from dsgc.core.optim import MultiStepSchedule, OptimizerKind, make_optimizer
from dsgc.core.tensor import Tape, Tensor, current_dtype
from dsgc.models.builder import Model
from dsgc.training.losses import bce_loss, cross_entropy_loss, mse_loss
from dsgc.training.metrics import bce, error_rate, rmse
from dsgc.training.reports import TrainReport
from dsgc.training.tasks import TaskData, TaskKind
from dsgc.utils.error_handlers import TrainingDivergenceError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

EVAL_CHUNK = 256

METRIC_NAMES = {
    TaskKind.NODE_BINARY: "bce",
    TaskKind.GRAPH_CLASS: "error_rate",
    TaskKind.NODE_REGRESSION: "rmse",
}


class TrainConfig(BaseModel):
    """Optimizer, schedule and batching of one training run."""
    model_config = ConfigDict(extra="forbid")

    optimizer: OptimizerKind = OptimizerKind.SGD
    lr: float = Field(default=0.1, gt=0.0)
    epochs: int = Field(default=100, ge=1)
    milestones: List[float] = Field(default_factory=lambda: [0.5, 0.75])
    decay: float = Field(default=0.1, gt=0.0)
    batch_size: Optional[int] = Field(default=None, ge=1, description="None trains full-batch")
    seed: int = 0
    precision: str = Field(default="f32", pattern="^(f32|f64)$")

    @field_validator("milestones")
    @classmethod
    def validate_milestones(cls, v: List[float]) -> List[float]:
        if any(not 0.0 < m < 1.0 for m in v):
            raise ValueError("milestones must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("milestones must be strictly increasing")
        return v


class TrainingProtocol(str, Enum):
    """Named training settings for the benchmark task families."""
    SIM = "sim"
    FORECAST = "forecast"


PROTOCOLS: Dict[TrainingProtocol, Dict[str, Any]] = {
    TrainingProtocol.SIM: {"optimizer": "adam", "lr": 0.01, "epochs": 20, "batch_size": 20},
    TrainingProtocol.FORECAST: {"optimizer": "adam", "lr": 0.005, "epochs": 40, "batch_size": 32},
}


def protocol_config(protocol: Union[str, TrainingProtocol], **overrides: Any) -> TrainConfig:
    """TrainConfig of a named protocol, with individual fields overridden."""
    return TrainConfig.model_validate({**PROTOCOLS[TrainingProtocol(protocol)], **overrides})


def task_loss(data: TaskData, out: Tensor, targets: np.ndarray, mask: Optional[np.ndarray]) -> Tensor:
    if data.kind is TaskKind.NODE_BINARY:
        return bce_loss(out, targets)
    if data.kind is TaskKind.GRAPH_CLASS:
        return cross_entropy_loss(out, targets)
    return mse_loss(out, targets, mask)


def predict_split(model: Model, data: TaskData, indices: Sequence[int]) -> np.ndarray:
    """Eval-mode predictions for the given samples, in chunks."""
    idx = np.asarray(indices, dtype=np.int64)
    parts = []
    for start in range(0, idx.size, EVAL_CHUNK):
        chunk = idx[start:start + EVAL_CHUNK]
        x, _, _ = data.batch(chunk)
        parts.append(model.predict(x, batch=chunk.size))
    if not parts:
        return np.empty((0,))
    return np.concatenate(parts, axis=0)


def evaluate(model: Model, data: TaskData, indices: Sequence[int]) -> float:
    """Task metric (bce, error rate or masked rmse) on the given samples; NaN when empty."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    pred = predict_split(model, data, idx)
    if data.kind is TaskKind.NODE_BINARY:
        return bce(pred, data.targets[idx])
    if data.kind is TaskKind.GRAPH_CLASS:
        return error_rate(pred, data.targets[idx])
    mask = None if data.target_mask is None else data.target_mask[idx]
    return rmse(pred, np.nan_to_num(data.targets[idx]), mask)


def _batches(indices: np.ndarray, batch_size: Optional[int], rng: np.random.Generator) -> List[np.ndarray]:
    if batch_size is None or batch_size >= indices.size:
        return [indices]
    order = rng.permutation(indices)
    return [order[i:i + batch_size] for i in range(0, order.size, batch_size)]


def train_loop(
    model: Model,
    data: TaskData,
    cfg: TrainConfig,
    name: str = "model",
    seed: Optional[int] = None,
) -> TrainReport:
    """
    Train ``model`` on the train split and return its report.

    The returned test metric is that of the epoch with the best validation
    metric; the model is left holding that checkpoint.
    """
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    optimizer = make_optimizer(cfg.optimizer, model.named_parameters(), cfg.lr)
    schedule = MultiStepSchedule(cfg.lr, cfg.epochs, cfg.milestones, cfg.decay)
    train_idx = np.asarray(data.splits["train"], dtype=np.int64)
    val_idx = np.asarray(data.splits["val"], dtype=np.int64)
    log = logger.bind(model=name, seed=seed)

    losses: List[float] = []
    val_metrics: List[float] = []
    best_metric = np.inf
    best_epoch = 0
    best_state: Optional[Dict[str, np.ndarray]] = None
    tape = Tape()
    started = time.perf_counter()

    for epoch in range(cfg.epochs):
        optimizer.lr = schedule.lr_at(epoch)
        model.train()
        total, seen = 0.0, 0
        for idx in _batches(train_idx, cfg.batch_size, rng):
            x, targets, mask = data.batch(idx)
            tape.reset()
            optimizer.zero_grad()
            with tape:
                out = model(Tensor(x), batch=idx.size)
                loss = task_loss(data, out, targets, mask)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergenceError(f"training loss became {value}", epoch=epoch)
            tape.backward(loss)
            grad_sq = sum(float(np.sum(p.grad * p.grad)) for p in optimizer.params.values() if p.grad is not None)
            if not np.isfinite(grad_sq):
                log.warning("non_finite_gradient", epoch=epoch)
                raise TrainingDivergenceError("gradient norm is not finite", epoch=epoch)
            optimizer.step()
            total += value * idx.size
            seen += idx.size

        train_loss = total / max(seen, 1)
        val = evaluate(model, data, val_idx) if val_idx.size else train_loss
        losses.append(float(train_loss))
        val_metrics.append(float(val))
        if best_state is None or val < best_metric:
            best_metric, best_epoch = val, epoch
            best_state = model.state_dict()
        log.info("epoch_complete", epoch=epoch, train_loss=train_loss, val_metric=val, lr=optimizer.lr)

    assert best_state is not None
    model.load_state_dict(best_state)
    test = evaluate(model, data, data.splits["test"])
    elapsed = time.perf_counter() - started
    log.info("training_complete", best_epoch=best_epoch, test_metric=test, seconds=round(elapsed, 3))
    return TrainReport(
        model=name,
        seed=seed,
        precision="f64" if current_dtype() is np.float64 else "f32",
        epochs=cfg.epochs,
        metric=METRIC_NAMES[data.kind],
        train_loss=losses,
        val_metric=val_metrics,
        best_epoch=best_epoch,
        test_metric=float(test),
        param_count=model.param_count(),
        wall_clock_seconds=elapsed,
    )
