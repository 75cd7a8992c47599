"""Optimizers and learning-rate schedules."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Mapping, Sequence, Tuple, Union

import numpy as np

from dsgc.core.tensor import Parameter
from dsgc.utils.error_handlers import DimensionError, ParameterError


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class OptimizerState:
    """Mutable optimizer state; moments are keyed like the parameters."""
    kind: OptimizerKind
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    state: OptimizerState,
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
) -> Dict[str, np.ndarray]:
    """
    Apply one update and return the new parameter arrays.

    SGD: p - lr * g. Adam: bias-corrected moments with (beta1, beta2, eps).
    """
    for name, value in params.items():
        if name not in grads or grads[name].shape != value.shape:
            shape = grads[name].shape if name in grads else ()
            raise DimensionError(f"gradient for {name!r} is not shape-congruent", shapes=[value.shape, shape])

    state.step += 1
    updated: Dict[str, np.ndarray] = {}
    if state.kind is OptimizerKind.SGD:
        for name, value in params.items():
            updated[name] = value - value.dtype.type(state.lr) * grads[name]
        return updated

    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, value in params.items():
        g = grads[name]
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(value)
            v = np.zeros_like(value)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.first_moment[name] = m.astype(value.dtype, copy=False)
        state.second_moment[name] = v.astype(value.dtype, copy=False)
        m_hat = m / correction1
        v_hat = v / correction2
        step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        updated[name] = (value - step).astype(value.dtype, copy=False)
    return updated


ParamSource = Union[Mapping[str, Parameter], Iterable[Tuple[str, Parameter]]]


class Optimizer:
    """Applies ``optimizer_step`` to named parameters in place."""

    def __init__(self, params: ParamSource, state: OptimizerState):
        items = params.items() if isinstance(params, Mapping) else params
        self.params: Dict[str, Parameter] = dict(items)
        self.state = state

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = float(value)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        values = {name: p.data for name, p in self.params.items()}
        grads = {
            name: p.grad if p.grad is not None else np.zeros_like(p.data)
            for name, p in self.params.items()
        }
        for name, value in optimizer_step(self.state, values, grads).items():
            self.params[name].data = value


class SGD(Optimizer):
    def __init__(self, params: ParamSource, lr: float = 0.1):
        super().__init__(params, OptimizerState(kind=OptimizerKind.SGD, lr=lr))


class Adam(Optimizer):
    def __init__(
        self,
        params: ParamSource,
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        super().__init__(
            params,
            OptimizerState(kind=OptimizerKind.ADAM, lr=lr, beta1=betas[0], beta2=betas[1], eps=eps),
        )


def make_optimizer(kind: Union[str, OptimizerKind], params: ParamSource, lr: float) -> Optimizer:
    kind = OptimizerKind(kind)
    if kind is OptimizerKind.SGD:
        return SGD(params, lr=lr)
    return Adam(params, lr=lr)


class MultiStepSchedule:
    """
    Step decay at fractions of the total epoch count.

    ``lr_at(e)`` multiplies the base rate by ``factor`` once for every
    milestone m with ``e >= int(m * epochs)`` (epochs are 0-based).
    """

    def __init__(self, base_lr: float, epochs: int, milestones: Sequence[float] = (0.5, 0.75), factor: float = 0.1):
        if any(not 0.0 < m < 1.0 for m in milestones):
            raise ParameterError("milestones must lie strictly inside (0, 1)", name="milestones", value=list(milestones))
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ParameterError("milestones must be strictly increasing", name="milestones", value=list(milestones))
        self.base_lr = base_lr
        self.epochs = epochs
        self.factor = factor
        self.boundaries = [int(m * epochs) for m in milestones]

    def lr_at(self, epoch: int) -> float:
        passed = sum(1 for b in self.boundaries if epoch >= b)
        return self.base_lr * self.factor ** passed
