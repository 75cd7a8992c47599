from dsgc.core.optim import SGD, Adam, MultiStepSchedule, OptimizerKind, OptimizerState, optimizer_step
from dsgc.core.tensor import (
    Function,
    Parameter,
    Tape,
    Tensor,
    backward,
    current_dtype,
    precision_scope,
    resolve_precision,
)

__all__ = [
    "SGD",
    "Adam",
    "Function",
    "MultiStepSchedule",
    "OptimizerKind",
    "OptimizerState",
    "Parameter",
    "Tape",
    "Tensor",
    "backward",
    "current_dtype",
    "optimizer_step",
    "precision_scope",
    "resolve_precision",
]
