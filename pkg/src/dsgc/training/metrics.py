"""Evaluation metrics on plain arrays. All are lower-is-better."""

from typing import Optional

import numpy as np

from dsgc.utils.error_handlers import DimensionError

BCE_CLAMP = 1e-7


def rmse(pred: np.ndarray, target: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Root mean squared error, optionally over masked entries only."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if pred.shape != target.shape:
        raise DimensionError("rmse: prediction and target lengths differ", shapes=[pred.shape, target.shape])
    if mask is None:
        keep = np.ones(pred.shape, dtype=bool)
    else:
        keep = np.asarray(mask).reshape(-1) > 0
    if not keep.any():
        return float("nan")
    diff = pred[keep] - target[keep]
    return float(np.sqrt(np.mean(diff * diff)))


def bce(prob: np.ndarray, target: np.ndarray, eps: float = BCE_CLAMP) -> float:
    p = np.clip(np.asarray(prob, dtype=np.float64).reshape(-1), eps, 1.0 - eps)
    t = np.asarray(target, dtype=np.float64).reshape(-1)
    return float(-np.mean(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)))


def error_rate(scores: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose arg-max class differs from the label."""
    scores = np.asarray(scores)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if scores.ndim != 2 or scores.shape[0] != labels.size:
        raise DimensionError("error_rate: one label per row required", shapes=[scores.shape, labels.shape])
    if labels.size == 0:
        return float("nan")
    return float(np.mean(np.argmax(scores, axis=1) != labels))
