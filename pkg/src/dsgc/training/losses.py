"""Differentiable training losses. Each returns a 0-d tensor."""

from typing import Optional, Tuple

import numpy as np

from dsgc.core.tensor import Function, Tensor
from dsgc.utils.error_handlers import ContractError, DimensionError

BCE_CLAMP = 1e-7


class BinaryCrossEntropy(Function):
    def forward(self, pred: np.ndarray, target: np.ndarray, eps: float) -> np.ndarray:
        self.inside = (pred > eps) & (pred < 1.0 - eps)
        self.p = np.clip(pred, eps, 1.0 - eps)
        self.t = target
        ll = target * np.log(self.p) + (1.0 - target) * np.log(1.0 - self.p)
        return np.asarray(-ll.mean(), dtype=pred.dtype)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        d = (self.p - self.t) / (self.p * (1.0 - self.p)) / self.p.size
        return ((grad * d * self.inside).astype(self.p.dtype, copy=False),)


def bce_loss(pred: Tensor, target: np.ndarray, eps: float = BCE_CLAMP) -> Tensor:
    """Mean binary cross entropy of probabilities, clamped ``eps`` away from 0 and 1."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.size != pred.size:
        raise DimensionError("bce_loss: prediction and target sizes differ", shapes=[pred.shape, target.shape])
    target = target.reshape(pred.shape)
    if not np.all((target == 0) | (target == 1)):
        raise ContractError("bce_loss targets must be 0 or 1")
    return BinaryCrossEntropy.apply(pred, target=target, eps=eps)


class SoftmaxCrossEntropy(Function):
    def forward(self, logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_z
        self.probs = np.exp(log_probs)
        self.labels = labels
        rows = np.arange(labels.size)
        return np.asarray(-log_probs[rows, labels].mean(), dtype=logits.dtype)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        d = self.probs.copy()
        d[np.arange(self.labels.size), self.labels] -= 1.0
        return (grad * d / self.labels.size,)


def cross_entropy_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the true class (log-sum-exp stabilized)."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or labels.size != logits.shape[0]:
        raise DimensionError("cross_entropy_loss: one label per row required", shapes=[logits.shape, labels.shape])
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ContractError(f"labels must lie in [0, {logits.shape[1]})")
    return SoftmaxCrossEntropy.apply(logits, labels=labels)


class MaskedSquaredError(Function):
    def forward(self, pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> np.ndarray:
        self.mask = mask
        self.count = max(float(mask.sum()), 1.0)
        self.diff = (pred - target) * mask
        return np.asarray((self.diff * self.diff).sum() / self.count, dtype=pred.dtype)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * 2.0 * self.diff / self.count,)


def mse_loss(pred: Tensor, target: np.ndarray, mask: Optional[np.ndarray] = None) -> Tensor:
    """Mean squared error over entries where ``mask`` is 1."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.size != pred.size:
        raise DimensionError("mse_loss: prediction and target sizes differ", shapes=[pred.shape, target.shape])
    target = target.reshape(pred.shape)
    if mask is None:
        mask = np.ones_like(target)
    else:
        mask = np.asarray(mask, dtype=pred.data.dtype)
        if mask.size != pred.size:
            raise DimensionError("mse_loss: prediction and mask sizes differ", shapes=[pred.shape, mask.shape])
        mask = mask.reshape(pred.shape)
    return MaskedSquaredError.apply(pred, target=np.where(mask > 0, target, 0.0).astype(target.dtype), mask=mask)
