"""
Differentiable primitives.

Every public function validates its operands, then dispatches to a
``Function`` subclass. Scatter-style reductions accumulate in edge-index order
(``np.bincount`` walks its input sequentially), which keeps loss curves
bitwise reproducible.
"""

from typing import Any, Optional, Sequence, Tuple

import numpy as np

from dsgc.core.tensor import Function, Tensor
from dsgc.utils.error_handlers import (
    BoundsError,
    ContractError,
    DimensionError,
    StructuralError,
)

IndexArray = np.ndarray


def scatter_rows(index: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    """out[index[e]] += values[e], accumulated in increasing e."""
    if values.ndim == 1:
        return np.bincount(index, weights=values, minlength=n)[:n].astype(values.dtype, copy=False)
    flat = values.reshape(values.shape[0], -1)
    out = np.empty((n, flat.shape[1]), dtype=values.dtype)
    for col in range(flat.shape[1]):
        out[:, col] = np.bincount(index, weights=flat[:, col], minlength=n)[:n]
    return out.reshape((n,) + values.shape[1:])


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: operand shapes differ", shapes=[a.shape, b.shape])


def _check_index(name: str, index: np.ndarray, limit: int) -> np.ndarray:
    index = np.asarray(index, dtype=np.int64)
    if index.size:
        lo, hi = int(index.min()), int(index.max())
        if lo < 0:
            raise BoundsError(f"{name} contains negative index {lo}", index=lo, limit=limit)
        if hi >= limit:
            raise BoundsError(f"{name} index {hi} out of range for size {limit}", index=hi, limit=limit)
    return index


# ----------------------------------------------------------------------------
# Linear algebra and elementwise
# ----------------------------------------------------------------------------

class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad @ self.b.T, self.a.T @ grad


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul: inner dimensions disagree", shapes=[a.shape, b.shape])
    return MatMul.apply(a, b)


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, grad


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a - b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, -grad


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self.a, self.b = a, b
        return a * b

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad * self.b, grad * self.a


class Scale(Function):
    def forward(self, a: np.ndarray, factor: float) -> np.ndarray:
        self.factor = factor
        return a * a.dtype.type(factor)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * grad.dtype.type(self.factor),)


class Tanh(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * (1 - self.out * self.out),)


class Relu(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.mask = a > 0
        return np.where(self.mask, a, 0).astype(a.dtype, copy=False)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = 0.5 * (np.tanh(0.5 * a) + 1)
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.out * (1 - self.out),)


class Exp(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.exp(a)
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * self.out,)


class Log(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.a = a
        return np.log(a)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad / self.a,)


class Square(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.a = a
        return a * a

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (2 * grad * self.a,)


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("mul", a, b)
    return Mul.apply(a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=float(factor))


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def log(a: Tensor) -> Tensor:
    return Log.apply(a)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "tanh": tanh,
    "relu": relu,
    "sigmoid": sigmoid,
    "scale": scale,
}


def elementwise(op: str, *args: Any) -> Tensor:
    """Dispatch one of add, mul, tanh, relu, sigmoid, scale by name."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}; expected one of {sorted(_ELEMENTWISE)}") from None
    return fn(*args)


# ----------------------------------------------------------------------------
# Reductions and shape
# ----------------------------------------------------------------------------

class Sum(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.shape = a.shape
        return np.asarray(a.sum())

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.full(self.shape, grad, dtype=grad.dtype),)


class Mean(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.shape = a.shape
        self.count = max(a.size, 1)
        return np.asarray(a.mean())

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.full(self.shape, grad / self.count, dtype=grad.dtype),)


def sum(a: Tensor) -> Tensor:  # noqa: A001
    return Sum.apply(a)


def mean(a: Tensor) -> Tensor:
    return Mean.apply(a)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        self.original = a.shape
        return a.reshape(shape)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad.reshape(self.original),)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if -1 not in shape and int(np.prod(shape)) != a.size:
        raise DimensionError("reshape: element count changes", shapes=[a.shape, shape])
    return Reshape.apply(a, shape=shape)


class Transpose(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(a.T)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.ascontiguousarray(grad.T),)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError("transpose expects a matrix", shapes=[a.shape])
    return Transpose.apply(a)


class Concat(Function):
    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        self.widths = [arr.shape[1] for arr in arrays]
        return np.concatenate(arrays, axis=1)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        cuts = np.cumsum(self.widths)[:-1]
        return tuple(np.ascontiguousarray(g) for g in np.split(grad, cuts, axis=1))


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate matrices along the channel axis."""
    rows = {t.shape[0] for t in tensors}
    if any(t.ndim != 2 for t in tensors) or len(rows) != 1:
        raise DimensionError("concat: row counts differ", shapes=[t.shape for t in tensors])
    return Concat.apply(*tensors)


class AddBias(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b[None, :]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, grad.sum(axis=0)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a row-vector bias to every row of a matrix."""
    if a.ndim != 2 or bias.shape != (a.shape[1],):
        raise DimensionError("add_bias: bias must match the column count", shapes=[a.shape, bias.shape])
    return AddBias.apply(a, bias)


class Take(Function):
    def forward(self, a: np.ndarray, indices: np.ndarray, axis: int) -> np.ndarray:
        self.shape, self.indices, self.axis = a.shape, indices, axis
        return np.take(a, indices, axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(np.moveaxis(out, self.axis, 0), self.indices, np.moveaxis(grad, self.axis, 0))
        return (out,)


def take(a: Tensor, indices: IndexArray, axis: int = 0) -> Tensor:
    """Select entries along one axis (index-select)."""
    indices = _check_index("take", np.asarray(indices), a.shape[axis])
    return Take.apply(a, indices=indices, axis=axis)


class RepeatColumns(Function):
    def forward(self, a: np.ndarray, repeats: int) -> np.ndarray:
        self.repeats = repeats
        return np.repeat(a, repeats, axis=1)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        rows, cols = grad.shape
        return (grad.reshape(rows, cols // self.repeats, self.repeats).sum(axis=2),)


def repeat_columns(a: Tensor, repeats: int) -> Tensor:
    """Repeat each column ``repeats`` times: column c feeds columns c*D..c*D+D-1."""
    if a.ndim != 2:
        raise DimensionError("repeat_columns expects a matrix", shapes=[a.shape])
    if repeats == 1:
        return a
    return RepeatColumns.apply(a, repeats=int(repeats))


class TileRows(Function):
    def forward(self, a: np.ndarray, reps: int) -> np.ndarray:
        self.reps, self.shape = reps, a.shape
        return np.concatenate([a] * reps, axis=0)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad.reshape((self.reps,) + self.shape).sum(axis=0),)


def tile_rows(a: Tensor, reps: int) -> Tensor:
    """Stack ``reps`` copies of ``a`` along the first axis."""
    if reps == 1:
        return a
    return TileRows.apply(a, reps=int(reps))


# ----------------------------------------------------------------------------
# Graph kernels
# ----------------------------------------------------------------------------

def check_segments(offsets: np.ndarray, total: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.ndim != 1 or offsets.size < 2:
        raise StructuralError("segment boundaries need at least one segment")
    if offsets[0] != 0 or offsets[-1] != total:
        raise StructuralError(
            f"segment boundaries must span [0, {total}), got [{offsets[0]}, {offsets[-1]})"
        )
    lengths = np.diff(offsets)
    if np.any(lengths <= 0):
        empty = int(np.flatnonzero(lengths <= 0)[0])
        raise StructuralError(f"segment {empty} is empty", metadata={"segment": empty})
    return offsets


class SegmentSoftmax(Function):
    def forward(self, logits: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        starts = offsets[:-1]
        self.starts, self.lengths = starts, np.diff(offsets)
        peak = np.maximum.reduceat(logits, starts, axis=0)
        shifted = logits - np.repeat(peak, self.lengths, axis=0)
        e = np.exp(shifted)
        total = np.add.reduceat(e, starts, axis=0)
        self.out = e / np.repeat(total, self.lengths, axis=0)
        return self.out

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        dot = np.add.reduceat(grad * self.out, self.starts, axis=0)
        return (self.out * (grad - np.repeat(dot, self.lengths, axis=0)),)


def segment_softmax(logits: Tensor, offsets: IndexArray) -> Tensor:
    """
    Softmax within contiguous segments ``[offsets[s], offsets[s+1])``.

    Works on a vector (E,) or column-wise on a matrix (E, C).
    """
    offsets = check_segments(offsets, logits.shape[0])
    return SegmentSoftmax.apply(logits, offsets=offsets)


class GatherScatter(Function):
    def forward(
        self,
        source: np.ndarray,
        weight: np.ndarray,
        edge_src: np.ndarray,
        edge_dst: np.ndarray,
        num_nodes: int,
        fan_in: Optional[int] = None,
    ) -> np.ndarray:
        self.source, self.weight = source, weight
        self.edge_src, self.edge_dst = edge_src, edge_dst
        self.fan_in = fan_in
        gathered = source[edge_src]
        self.per_edge = weight.ndim == 1
        w = weight[:, None] if self.per_edge else weight
        if fan_in is not None:
            return (gathered * w).reshape(num_nodes, fan_in, -1).sum(axis=1)
        return scatter_rows(edge_dst, gathered * w, num_nodes)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.fan_in is not None:
            g = np.repeat(grad, self.fan_in, axis=0)
        else:
            g = grad[self.edge_dst]
        w = self.weight[:, None] if self.per_edge else self.weight
        d_source = scatter_rows(self.edge_src, g * w, self.source.shape[0])
        d_weight = g * self.source[self.edge_src]
        if self.per_edge:
            d_weight = d_weight.sum(axis=1)
        return d_source, d_weight


def gather_scatter(
    source: Tensor,
    edge_src: IndexArray,
    edge_dst: IndexArray,
    edge_weight: Tensor,
    num_nodes: Optional[int] = None,
    fan_in: Optional[int] = None,
) -> Tensor:
    """
    Weighted neighbourhood aggregation: ``y[dst] += w[e] * source[src]``.

    ``edge_weight`` is per edge (E,) or per edge and channel (E, Q). With
    ``fan_in=k`` the edges must be grouped by destination, exactly k per
    node in order, and the sum runs as a reshape instead of a scatter.
    """
    if source.ndim != 2:
        raise DimensionError("gather_scatter: source must be a matrix", shapes=[source.shape])
    n_src, channels = source.shape
    n_out = n_src if num_nodes is None else int(num_nodes)
    edge_src = _check_index("edge_src", np.asarray(edge_src), n_src)
    edge_dst = _check_index("edge_dst", np.asarray(edge_dst), n_out)
    if edge_src.shape != edge_dst.shape:
        raise DimensionError("gather_scatter: edge lists differ in length", shapes=[edge_src.shape, edge_dst.shape])
    expected = [(edge_src.size,), (edge_src.size, channels)]
    if edge_weight.shape not in expected:
        raise DimensionError(
            "gather_scatter: edge_weight must be (E,) or (E, Q)",
            shapes=[edge_weight.shape, expected[1]],
        )
    if fan_in is not None:
        fan_in = int(fan_in)
        if fan_in < 1 or edge_dst.size != n_out * fan_in:
            raise StructuralError(
                f"gather_scatter: {edge_dst.size} edges cannot give {n_out} nodes a fan-in of {fan_in}"
            )
        if edge_dst.size and np.any(edge_dst.reshape(n_out, fan_in) != np.arange(n_out)[:, None]):
            raise StructuralError("gather_scatter: edges are not grouped by destination with a fixed fan-in")
    return GatherScatter.apply(
        source, edge_weight, edge_src=edge_src, edge_dst=edge_dst, num_nodes=n_out, fan_in=fan_in
    )


class ClusterPool(Function):
    def forward(self, x: np.ndarray, assignment: np.ndarray, clusters: int, mode: str) -> np.ndarray:
        self.assignment, self.mode, self.rows = assignment, mode, x.shape[0]
        if mode == "mean":
            self.counts = np.bincount(assignment, minlength=clusters).astype(x.dtype)
            return scatter_rows(assignment, x, clusters) / self.counts[:, None]
        peak = np.full((clusters, x.shape[1]), -np.inf, dtype=x.dtype)
        np.maximum.at(peak, assignment, x)
        # lowest node index wins ties
        rows, cols = np.nonzero(x == peak[assignment])
        winner = np.full(peak.shape, self.rows, dtype=np.int64)
        np.minimum.at(winner, (assignment[rows], cols), rows)
        self.winner = winner
        return peak

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        if self.mode == "mean":
            return ((grad / self.counts[:, None])[self.assignment],)
        out = np.zeros((self.rows, grad.shape[1]), dtype=grad.dtype)
        cols = np.broadcast_to(np.arange(grad.shape[1]), grad.shape)
        out[self.winner, cols] = grad
        return (out,)


def cluster_pool(x: Tensor, assignment: IndexArray, clusters: int, mode: str = "mean") -> Tensor:
    """Pool rows of ``x`` into ``clusters`` rows by mean or max."""
    if mode not in ("mean", "max"):
        raise ContractError(f"unknown pooling mode {mode!r}; expected 'mean' or 'max'")
    assignment = _check_index("assignment", np.asarray(assignment), clusters)
    if x.ndim != 2 or assignment.shape != (x.shape[0],):
        raise DimensionError("cluster_pool: one assignment per row required", shapes=[x.shape, assignment.shape])
    counts = np.bincount(assignment, minlength=clusters)
    if np.any(counts == 0):
        raise StructuralError(f"cluster {int(np.flatnonzero(counts == 0)[0])} has no members")
    return ClusterPool.apply(x, assignment=assignment, clusters=int(clusters), mode=mode)


class GatherRows(Function):
    def forward(self, x: np.ndarray, index: np.ndarray) -> np.ndarray:
        self.index, self.rows = index, x.shape[0]
        return x[index]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (scatter_rows(self.index, grad, self.rows),)


def gather_rows(x: Tensor, index: IndexArray) -> Tensor:
    index = _check_index("index", np.asarray(index), x.shape[0])
    return GatherRows.apply(x, index=index)
