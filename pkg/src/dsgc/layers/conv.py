"""
Graph convolution operators.

All operators act on a node-feature matrix ``x`` of shape (batch * n) x P that
stacks ``batch`` signals on the same graph, signal b occupying rows
b*n .. b*n + n - 1. Per-edge weights are computed once per graph and tiled
over the batch.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Function, Tensor
from dsgc.graph.laplacian import LaplacianOperator
from dsgc.graph.spatial import NeighborGraph, grid_offset_index, table_size
from dsgc.layers.base import Module, glorot_uniform
from dsgc.layers.filters import DEFAULT_FILTER_HIDDEN, FilterMLP
from dsgc.utils.error_handlers import ConfigurationError, ContractError, DimensionError, ParameterError


def _check_rows(x: Tensor, n: int, batch: int) -> None:
    if x.ndim != 2 or x.shape[0] != n * batch:
        raise DimensionError(
            f"node features must have {n} x {batch} rows",
            shapes=[x.shape, (n * batch, x.shape[-1] if x.ndim else 0)],
        )


def _check_channels(x: Tensor, weight: Tensor) -> None:
    if x.shape[1] != weight.shape[0]:
        raise DimensionError("input channels do not match the channel matrix", shapes=[x.shape, weight.shape])


def _offset_index(g: NeighborGraph, radius: int) -> np.ndarray:
    key = ("offset_index", radius)
    if key not in g._cache:
        g._cache[key] = grid_offset_index(g.delta, radius)
    return g._cache[key]


def _aggregate(g: NeighborGraph, source: Tensor, weight: Tensor, batch: int) -> Tensor:
    gb = g.batch(batch)
    return ops.gather_scatter(
        source, gb.src, gb.dst, ops.tile_rows(weight, batch), num_nodes=gb.num_nodes, fan_in=g.k
    )


# ----------------------------------------------------------------------------
# Label propagation and graph convolution
# ----------------------------------------------------------------------------

def label_propagate(g: NeighborGraph, x: Tensor, batch: int = 1) -> Tensor:
    """y_i = sum_j G_ij x_j with the graph's normalized adjacency."""
    if g.g_weight is None:
        raise ContractError("graph carries no normalized adjacency; use graph.with_normalized_adjacency()")
    _check_rows(x, g.n, batch)
    return _aggregate(g, x, Tensor(g.g_weight), batch)


def graph_conv(g: NeighborGraph, x: Tensor, U: Tensor, batch: int = 1) -> Tensor:
    """y = G (X U)."""
    if g.g_weight is None:
        raise ContractError("graph carries no normalized adjacency; use graph.with_normalized_adjacency()")
    _check_channels(x, U)
    return label_propagate(g, ops.matmul(x, U), batch)


class LpLayer(Module):
    kind = "lp"

    def __init__(self, channels: int):
        super().__init__()
        self.in_channels = self.out_channels = channels

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        return label_propagate(graph, x, batch)

    def manifest(self) -> Dict[str, Any]:
        return _manifest(self.kind, P=self.in_channels, Q=self.out_channels)


class GcLayer(Module):
    kind = "gc"

    def __init__(self, in_channels: int, out_channels: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.U = self.register_parameter("U", glorot_uniform(rng, in_channels, out_channels))

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        return graph_conv(graph, x, self.U, batch)

    def manifest(self) -> Dict[str, Any]:
        return _manifest(self.kind, P=self.in_channels, Q=self.out_channels)


# ----------------------------------------------------------------------------
# DSGC and MPNN
# ----------------------------------------------------------------------------

def filter_weights(predictor: Module, g: NeighborGraph, normalize: bool = True) -> Tensor:
    """E x C edge weights; with ``normalize`` each destination's weights sum to 1 per group."""
    logits = predictor(g.delta)
    return ops.segment_softmax(logits, g.offsets) if normalize else logits


def _separable(g: NeighborGraph, x: Tensor, U: Tensor, predictor: Module, normalize: bool, batch: int) -> Tensor:
    groups = predictor.groups
    out_channels = U.shape[1]
    if out_channels % groups:
        raise ConfigurationError(f"{groups} channel groups do not divide {out_channels} output channels")
    _check_rows(x, g.n, batch)
    _check_channels(x, U)
    z = ops.matmul(x, U)
    # channel q uses the filter of group q // D
    weights = ops.repeat_columns(filter_weights(predictor, g, normalize), out_channels // groups)
    return _aggregate(g, z, weights, batch)


class DsgcLayer(Module):
    """
    Depthwise separable graph convolution: a shared channel mix ``U`` followed by
    per-group spatial filters predicted from the edge offset features.
    """

    kind = "dsgc"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        groups: int = 1,
        hidden: int = DEFAULT_FILTER_HIDDEN,
        normalize: bool = True,
        rng: Optional[np.random.Generator] = None,
        shared_filter: Optional[FilterMLP] = None,
    ):
        super().__init__()
        if groups < 1 or out_channels % groups:
            raise ConfigurationError(f"{groups} channel groups do not divide {out_channels} output channels")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.groups, self.hidden, self.normalize = groups, hidden, normalize
        self.U = self.register_parameter("U", glorot_uniform(rng, in_channels, out_channels))
        self.shares_filter = shared_filter is not None
        if shared_filter is not None:
            if shared_filter.groups != groups:
                raise ConfigurationError("a shared filter must have the same group count")
            self.hidden = shared_filter.hidden
            self._predictor: Module = shared_filter
        else:
            self._predictor = self.add_module("filter", FilterMLP(groups, hidden, rng=rng))

    @property
    def filter(self) -> Module:
        return self._predictor

    def use_filter(self, predictor: Module) -> None:
        """Swap the weight predictor (e.g. for a ``LookupFilter``)."""
        if predictor.groups != self.groups:
            raise ConfigurationError("replacement filter must have the same group count")
        self._children.pop("filter", None)
        if predictor.parameters():
            self.add_module("filter", predictor)
        self._predictor = predictor

    def edge_weights(self, graph: NeighborGraph) -> Tensor:
        return filter_weights(self._predictor, graph, self.normalize)

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        return _separable(graph, x, self.U, self._predictor, self.normalize, batch)

    def manifest(self) -> Dict[str, Any]:
        doc = _manifest(self.kind, P=self.in_channels, Q=self.out_channels, C=self.groups, H=self.hidden, normalize=self.normalize)
        doc["share_filter"] = self.shares_filter
        return doc


class MpnnLayer(DsgcLayer):
    """Edge-network convolution: one filter shared by all channels."""

    kind = "mpnn"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        hidden: int = DEFAULT_FILTER_HIDDEN,
        normalize: bool = True,
        rng: Optional[np.random.Generator] = None,
        shared_filter: Optional[FilterMLP] = None,
    ):
        super().__init__(in_channels, out_channels, 1, hidden, normalize, rng, shared_filter)


def dsgc_forward(layer: DsgcLayer, g: NeighborGraph, x: Tensor, batch: int = 1) -> Tensor:
    return layer(x, g, batch)


def mpnn_conv(
    g: NeighborGraph,
    x: Tensor,
    U: Tensor,
    filter: Module,
    normalize: bool = True,
    batch: int = 1,
) -> Tensor:
    if filter.groups != 1:
        raise ConfigurationError(f"an MPNN filter has exactly one output, got {filter.groups}")
    return _separable(g, x, U, filter, normalize, batch)


# ----------------------------------------------------------------------------
# Grid-only lookup-table convolutions
# ----------------------------------------------------------------------------

class DscLayer(Module):
    """Depthwise separable convolution on a regular grid: ``U`` then a Q x R offset table."""

    kind = "dsc"

    def __init__(self, in_channels: int, out_channels: int, radius: int = 1, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels, self.radius = in_channels, out_channels, radius
        r = table_size(radius)
        self.U = self.register_parameter("U", glorot_uniform(rng, in_channels, out_channels))
        self.W = self.register_parameter("W", glorot_uniform(rng, r, out_channels, shape=(out_channels, r)))

    def edge_weights(self, graph: NeighborGraph) -> Tensor:
        return ops.transpose(ops.take(self.W, _offset_index(graph, self.radius), axis=1))

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        _check_rows(x, graph.n, batch)
        _check_channels(x, self.U)
        weights = self.edge_weights(graph)
        return _aggregate(graph, ops.matmul(x, self.U), weights, batch)

    def manifest(self) -> Dict[str, Any]:
        doc = _manifest(self.kind, P=self.in_channels, Q=self.out_channels)
        doc["R"] = table_size(self.radius)
        return doc


def depthwise_separable_conv(layer: DscLayer, g_grid: NeighborGraph, x: Tensor, batch: int = 1) -> Tensor:
    return layer(x, g_grid, batch)


class FullConvLayer(Module):
    """Full convolution on a regular grid: one P x Q matrix per offset."""

    kind = "full"

    def __init__(self, in_channels: int, out_channels: int, radius: int = 1, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels, self.radius = in_channels, out_channels, radius
        r = table_size(radius)
        self.W = self.register_parameter(
            "W", glorot_uniform(rng, in_channels * r, out_channels, shape=(in_channels, out_channels, r))
        )

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        _check_rows(x, graph.n, batch)
        if x.shape[1] != self.in_channels:
            raise DimensionError("input channels do not match the filter bank", shapes=[x.shape, self.W.shape])
        p, q, r = self.W.shape
        gb = graph.batch(batch)
        offsets = np.tile(_offset_index(graph, self.radius), batch)
        # column q*R + r of z holds sum_p x_p W[p, q, r]
        z = ops.matmul(x, ops.reshape(self.W, (p, q * r)))
        flat = ops.reshape(z, (z.size,))
        picks = (gb.src[:, None] * q + np.arange(q)[None, :]) * r + offsets[:, None]
        per_edge = ops.reshape(ops.take(flat, picks.reshape(-1)), (gb.src.size, q))
        ones = Tensor(np.ones(gb.src.size))
        return ops.gather_scatter(
            per_edge, np.arange(gb.src.size), gb.dst, ones, num_nodes=gb.num_nodes, fan_in=graph.k
        )

    def manifest(self) -> Dict[str, Any]:
        doc = _manifest(self.kind, P=self.in_channels, Q=self.out_channels)
        doc["R"] = table_size(self.radius)
        return doc


def full_conv(layer: FullConvLayer, g_grid: NeighborGraph, x: Tensor, batch: int = 1) -> Tensor:
    return layer(x, g_grid, batch)


# ----------------------------------------------------------------------------
# ChebyNet
# ----------------------------------------------------------------------------

class ChebyLayer(Module):
    """
    Chebyshev filter of order K over a cached scaled Laplacian.

    Terms run over k = 0 .. K-1, with T_0 = I.
    """

    kind = "cheby"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        laplacian: LaplacianOperator,
        order: int = 3,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if order < 1:
            raise ParameterError("Chebyshev order must be at least 1", name="order", value=order)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels, self.order = in_channels, out_channels, order
        self.laplacian = laplacian
        self.U = [
            self.register_parameter(f"U{k}", glorot_uniform(rng, in_channels, out_channels)) for k in range(order)
        ]

    def forward(self, x: Tensor, graph: Optional[NeighborGraph] = None, batch: int = 1) -> Tensor:
        n = self.laplacian.n
        if graph is not None and graph.n != n:
            raise DimensionError("graph size differs from the cached Laplacian", shapes=[(graph.n,), (n,)])
        _check_rows(x, n, batch)
        _check_channels(x, self.U[0])
        dst, src, values = self.laplacian.batched_edges(batch)
        lap = Tensor(values)

        prev, cur = None, x
        out = ops.matmul(x, self.U[0])
        for k in range(1, self.order):
            step = ops.gather_scatter(cur, src, dst, lap)
            nxt = step if prev is None else ops.sub(ops.scale(step, 2.0), prev)
            out = ops.add(out, ops.matmul(nxt, self.U[k]))
            prev, cur = cur, nxt
        return out

    def manifest(self) -> Dict[str, Any]:
        return _manifest(self.kind, P=self.in_channels, Q=self.out_channels, K=self.order)


def cheby_conv(layer: ChebyLayer, x: Tensor, batch: int = 1) -> Tensor:
    return layer(x, None, batch)


# ----------------------------------------------------------------------------
# MoNet
# ----------------------------------------------------------------------------

class GaussianLogKernel(Function):
    """log w_k(v) = -1/2 sum_d (v_d - mu_kd)^2 exp(-s_kd) for fixed pseudo-coordinates v."""

    def forward(self, mu: np.ndarray, log_var: np.ndarray, v: np.ndarray) -> np.ndarray:
        self.diff = v[:, None, :] - mu[None, :, :]
        self.inv_var = np.exp(-log_var)
        self.sq = self.diff * self.diff
        return -0.5 * (self.sq * self.inv_var[None]).sum(axis=2)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g = grad[:, :, None]
        d_mu = (g * self.diff * self.inv_var[None]).sum(axis=0)
        d_log_var = 0.5 * (g * self.sq * self.inv_var[None]).sum(axis=0)
        return d_mu, d_log_var


def gaussian_log_kernel(mu: Tensor, log_var: Tensor, v: np.ndarray) -> Tensor:
    if mu.shape != log_var.shape or mu.shape[1] != v.shape[1]:
        raise DimensionError("kernel means, log-variances and coordinates disagree", shapes=[mu.shape, log_var.shape, v.shape])
    return GaussianLogKernel.apply(mu, log_var, v=np.asarray(v, dtype=mu.data.dtype))


class MonetLayer(Module):
    """
    Mixture of K diagonal Gaussian kernels over the edge offset features, one
    channel matrix per kernel. ``gat_normalize`` softmax-normalizes each
    kernel's log-weights over every neighbourhood.
    """

    kind = "monet"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernels: int = 2,
        gat_normalize: bool = False,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if kernels < 1:
            raise ParameterError("MoNet needs at least one kernel", name="kernels", value=kernels)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernels, self.gat_normalize = kernels, gat_normalize
        self.mu = self.register_parameter("mu", rng.uniform(-1.0, 1.0, size=(kernels, 5)))
        self.log_var = self.register_parameter("log_var", np.zeros((kernels, 5)))
        self.U = [
            self.register_parameter(f"U{k}", glorot_uniform(rng, in_channels, out_channels)) for k in range(kernels)
        ]

    def kernel_weights(self, graph: NeighborGraph) -> Tensor:
        """E x K edge weights."""
        log_w = gaussian_log_kernel(self.mu, self.log_var, graph.delta)
        if self.gat_normalize:
            return ops.segment_softmax(log_w, graph.offsets)
        return ops.exp(log_w)

    def forward(self, x: Tensor, graph: NeighborGraph, batch: int = 1) -> Tensor:
        _check_rows(x, graph.n, batch)
        _check_channels(x, self.U[0])
        weights = self.kernel_weights(graph)
        out: Optional[Tensor] = None
        for k in range(self.kernels):
            w_k = ops.reshape(ops.take(weights, [k], axis=1), (graph.num_edges,))
            y_k = _aggregate(graph, ops.matmul(x, self.U[k]), w_k, batch)
            out = y_k if out is None else ops.add(out, y_k)
        assert out is not None
        return out

    def manifest(self) -> Dict[str, Any]:
        doc = _manifest(self.kind, P=self.in_channels, Q=self.out_channels, K=self.kernels)
        doc["gat_normalize"] = self.gat_normalize
        return doc


def monet_conv(layer: MonetLayer, g: NeighborGraph, x: Tensor, batch: int = 1) -> Tensor:
    return layer(x, g, batch)


# ----------------------------------------------------------------------------
# Accounting
# ----------------------------------------------------------------------------

def _manifest(
    kind: str,
    P: int,
    Q: int,
    C: Optional[int] = None,
    H: Optional[int] = None,
    K: Optional[int] = None,
    normalize: Optional[bool] = None,
) -> Dict[str, Any]:
    return {"layer_kind": kind, "P": P, "Q": Q, "C": C, "H": H, "K": K, "normalize": normalize}


def param_count(layer: Module) -> int:
    """Trainable scalars owned by ``layer`` (a borrowed shared filter is not counted)."""
    return layer.param_count()


CONV_LAYERS = {
    "lp": LpLayer,
    "gc": GcLayer,
    "dsgc": DsgcLayer,
    "mpnn": MpnnLayer,
    "dsc": DscLayer,
    "full": FullConvLayer,
    "cheby": ChebyLayer,
    "monet": MonetLayer,
}
