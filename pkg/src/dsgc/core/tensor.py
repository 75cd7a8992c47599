"""
Dense tensors on a reverse-mode differentiation tape.

A ``Tensor`` wraps a numpy array. Operations are ``Function`` subclasses: the
forward pass works on raw arrays, the backward pass maps the gradient of the
output to gradients of the inputs. While a ``Tape`` is active every operation
whose inputs require gradients is appended to it; ``Tape.backward`` replays the
record in reverse order, accumulating into leaf ``.grad`` arrays.

Precision is context-scoped (``precision_scope``) so independent runs on
worker threads never mix float32 and float64.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Type, Union

import numpy as np

from dsgc.utils.error_handlers import ContractError, ParameterError, TapeError

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_PRECISIONS: Dict[str, Type[np.floating]] = {"f32": np.float32, "f64": np.float64}

_dtype_var: ContextVar[Type[np.floating]] = ContextVar("dsgc_dtype", default=np.float32)
_tape_var: ContextVar[Optional["Tape"]] = ContextVar("dsgc_tape", default=None)


def resolve_precision(name: Union[str, Any]) -> Type[np.floating]:
    key = getattr(name, "value", name)
    try:
        return _PRECISIONS[str(key).lower()]
    except KeyError:
        raise ParameterError(
            f"unknown precision {key!r}; expected one of {sorted(_PRECISIONS)}",
            name="precision",
            value=key,
        ) from None


def current_dtype() -> Type[np.floating]:
    return _dtype_var.get()


@contextmanager
def precision_scope(name: Union[str, Any]) -> Iterator[Type[np.floating]]:
    """Run the enclosed block with the given precision ('f32' or 'f64')."""
    dtype = resolve_precision(name)
    token = _dtype_var.set(dtype)
    try:
        yield dtype
    finally:
        _dtype_var.reset(token)


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement ``forward`` on numpy arrays and ``backward``, which
    returns one gradient (or None) per input tensor.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        tape = _tape_var.get() if any(t.requires_grad for t in inputs) else None
        result = Tensor(out, requires_grad=tape is not None, _creator=fn if tape else None)
        if tape is not None:
            tape.record(fn, result)
        return result


class Tensor:
    """Dense N-dimensional array that can participate in a tape."""

    __array_priority__ = 100

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _creator: Optional[Function] = None,
    ):
        self.data = np.ascontiguousarray(data, dtype=current_dtype())
        self.requires_grad = requires_grad
        self.name = name
        self._creator = _creator
        self._tape: Optional[Tape] = None
        self.grad: Optional[np.ndarray] = (
            np.zeros_like(self.data) if requires_grad and _creator is None else None
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def is_leaf(self) -> bool:
        return self._creator is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self) -> None:
        backward(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def __add__(self, other: "Tensor") -> "Tensor":
        from dsgc.core import ops

        return ops.add(self, _as_tensor(other, self.shape))

    __radd__ = __add__

    def __sub__(self, other: "Tensor") -> "Tensor":
        from dsgc.core import ops

        return ops.sub(self, _as_tensor(other, self.shape))

    def __mul__(self, other: Union["Tensor", float, int]) -> "Tensor":
        from dsgc.core import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other: Union[float, int]) -> "Tensor":
        from dsgc.core import ops

        return ops.scale(self, float(other))

    def __neg__(self) -> "Tensor":
        from dsgc.core import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from dsgc.core import ops

        return ops.matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{flag}{label})"


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data: ArrayLike, name: Optional[str] = None):
        super().__init__(data, requires_grad=True, name=name)


def _as_tensor(value: Any, shape: Tuple[int, ...]) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.full(shape, value))


class TapeEntry:
    __slots__ = ("function", "output")

    def __init__(self, function: Function, output: Tensor):
        self.function = function
        self.output = output


class Tape:
    """
    Ordered record of operations.

    Entries are appended in execution order, so every entry's inputs were
    produced earlier on the tape (or are leaves). A tape replays once; call
    ``reset()`` before recording the next step.
    """

    def __init__(self) -> None:
        self._entries: List[TapeEntry] = []
        self._consumed = False
        self._token: Any = None

    def __enter__(self) -> "Tape":
        self._token = _tape_var.set(self)
        return self

    def __exit__(self, *exc: Any) -> None:
        _tape_var.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def record(self, function: Function, output: Tensor) -> None:
        if self._consumed:
            raise TapeError("tape already replayed; call reset() before recording again")
        output._tape = self
        self._entries.append(TapeEntry(function, output))

    def reset(self) -> None:
        for entry in self._entries:
            entry.output._tape = None
        self._entries = []
        self._consumed = False

    def backward(self, loss: Tensor) -> None:
        if loss.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise TapeError("tape already replayed; call reset() before another backward pass")
        if loss._tape is not self:
            raise ContractError("loss was not recorded on this tape")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for entry in reversed(self._entries):
            grad = grads.pop(id(entry.output), None)
            if grad is None:
                continue
            entry.output._accumulate(grad)
            input_grads = entry.function.backward(grad)
            for tensor, g in zip(entry.function.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    tensor._accumulate(g)
                elif id(tensor) in grads:
                    grads[id(tensor)] = grads[id(tensor)] + g
                else:
                    grads[id(tensor)] = g
        self._consumed = True


def backward(loss: Tensor) -> None:
    """Replay the tape ``loss`` was recorded on."""
    if loss._tape is None:
        raise ContractError("loss is not on an active tape; record the forward pass inside `with Tape()`")
    loss._tape.backward(loss)
