"""
Instantiate a ``ModelSpec`` over a graph stack.

``Model.forward`` takes a (batch * n) x P matrix of stacked signals on the
level-0 graph. Node heads return (batch * n) x 1; the graph classifier returns
batch x classes logits.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Tensor
from dsgc.graph.coarsening import GraphStack, build_graph_stack, pool_apply
from dsgc.graph.laplacian import LaplacianOperator, scaled_laplacian
from dsgc.graph.spatial import NeighborGraph, table_size
from dsgc.layers.base import Module
from dsgc.layers.conv import (
    ChebyLayer,
    DscLayer,
    DsgcLayer,
    FullConvLayer,
    GcLayer,
    LpLayer,
    MonetLayer,
    MpnnLayer,
)
from dsgc.layers.dense import Dropout, Linear, NodeEmbedding
from dsgc.layers.filters import FilterMLP
from dsgc.models.specs import (
    NEIGHBORHOOD_KINDS,
    Activation,
    HeadKind,
    HeadSpec,
    LayerKind,
    LayerSpec,
    ModelSpec,
    Readout,
)
from dsgc.utils.error_handlers import ConfigurationError, DimensionError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)


def apply_activation(activation: Activation, x: Tensor) -> Tensor:
    if activation is Activation.TANH:
        return ops.tanh(x)
    if activation is Activation.RELU:
        return ops.relu(x)
    if activation is Activation.SIGMOID:
        return ops.sigmoid(x)
    return x


@dataclass
class _Block:
    layer: Module
    spec: LayerSpec
    level: int
    dropout: Optional[Dropout]
    pool_level: Optional[int]


def make_layer(
    index: int,
    spec: LayerSpec,
    laplacian: Optional[LaplacianOperator],
    rng: np.random.Generator,
    shared: Optional[FilterMLP],
) -> Module:
    P, Q = spec.in_channels, spec.out_channels
    kind = spec.kind
    if kind is LayerKind.LP:
        if P != Q:
            raise ConfigurationError("label propagation keeps the channel count", layer_index=index)
        return LpLayer(P)
    if kind is LayerKind.GC:
        return GcLayer(P, Q, rng=rng)
    if kind in (LayerKind.DSGC, LayerKind.MPNN):
        groups = spec.groups if kind is LayerKind.DSGC else 1
        if Q % groups:
            raise ConfigurationError(f"{groups} channel groups do not divide {Q} output channels", layer_index=index)
        if spec.share_filter and (shared is None or shared.groups != groups):
            raise ConfigurationError("share_filter needs an earlier filter with the same groups at this level", layer_index=index)
        borrowed = shared if spec.share_filter else None
        if kind is LayerKind.MPNN:
            return MpnnLayer(P, Q, hidden=spec.hidden, normalize=spec.normalize, rng=rng, shared_filter=borrowed)
        return DsgcLayer(P, Q, groups, spec.hidden, spec.normalize, rng=rng, shared_filter=borrowed)
    if kind is LayerKind.MONET:
        return MonetLayer(P, Q, spec.kernels, spec.gat_normalize, rng=rng)
    if kind is LayerKind.CHEBY:
        assert laplacian is not None
        return ChebyLayer(P, Q, laplacian, spec.order, rng=rng)
    if kind is LayerKind.DSC:
        return DscLayer(P, Q, spec.radius, rng=rng)
    if kind is LayerKind.FULL:
        return FullConvLayer(P, Q, spec.radius, rng=rng)
    return Linear(P, Q, rng=rng)


class Model(Module):
    """Convolution stack with interleaved K-means pooling and a task head."""

    kind = "model"

    def __init__(self, spec: ModelSpec, stack: GraphStack, seed: int = 0):
        super().__init__()
        self.spec = spec
        self.seed = seed
        self.stack = stack
        self.graphs: List[NeighborGraph] = [g.with_normalized_adjacency() for g in stack.graphs]
        rng = np.random.default_rng(seed)
        self._check_pools()
        self.pool_maps = [
            cmap if cmap.mode is pool.mode else cmap.with_mode(pool.mode)
            for cmap, pool in zip(stack.maps, spec.pools)
        ]

        self.embedding: Optional[NodeEmbedding] = None
        if spec.embedding_dim:
            self.embedding = NodeEmbedding(self.graphs[0].n, spec.embedding_dim, rng=rng)
            self.add_module("embedding", self.embedding)

        pool_after = {p.after: level for level, p in enumerate(spec.pools)}
        laplacians: Dict[int, LaplacianOperator] = {}
        shared: Dict[int, FilterMLP] = {}
        channels = spec.input_width
        self.blocks: List[_Block] = []
        for i, (layer_spec, level) in enumerate(zip(spec.layers, spec.layer_levels())):
            if layer_spec.in_channels != channels:
                raise ConfigurationError(
                    f"expects {layer_spec.in_channels} input channels but receives {channels}", layer_index=i
                )
            graph = self.graphs[level]
            if layer_spec.kind in NEIGHBORHOOD_KINDS and layer_spec.k != graph.k:
                raise ConfigurationError(
                    f"k={layer_spec.k} but the level-{level} graph has k={graph.k}", layer_index=i
                )
            if layer_spec.kind is LayerKind.CHEBY and level not in laplacians:
                laplacians[level] = scaled_laplacian(graph)
            layer = make_layer(i, layer_spec, laplacians.get(level), rng, shared.get(level))
            self.add_module(f"layers.{i}", layer)
            if isinstance(layer, DsgcLayer) and not layer.shares_filter and isinstance(layer.filter, FilterMLP):
                shared[level] = layer.filter
            dropout = None
            if layer_spec.dropout > 0:
                dropout = Dropout(layer_spec.dropout, seed=seed * 1009 + i)
                self.add_module(f"dropout.{i}", dropout)
            self.blocks.append(_Block(layer, layer_spec, level, dropout, pool_after.get(i)))
            channels = layer_spec.out_channels

        self.head_layers: List[Linear] = []
        self.head_dropouts: List[Dropout] = []
        self._build_head(spec.head, channels, rng)
        logger.debug("model_built", layers=len(self.blocks), levels=stack.levels, params=self.param_count())

    def _check_pools(self) -> None:
        spec = self.spec
        if len(spec.pools) != self.stack.levels - 1:
            raise ConfigurationError(
                f"spec has {len(spec.pools)} pooling stages but the graph stack has {self.stack.levels} levels"
            )
        afters = [p.after for p in spec.pools]
        if afters != sorted(set(afters)):
            raise ConfigurationError("pooling stages must follow distinct layers in increasing order")
        for level, pool in enumerate(spec.pools):
            if pool.after >= len(spec.layers):
                raise ConfigurationError("pooling follows a layer that does not exist", layer_index=pool.after)
            cmap = self.stack.maps[level]
            if cmap.m != pool.clusters:
                raise ConfigurationError(
                    f"pooling expects {pool.clusters} clusters but the coarsening map has {cmap.m}",
                    layer_index=pool.after,
                )

    def _build_head(self, head: HeadSpec, channels: int, rng: np.random.Generator) -> None:
        width = channels
        if head.kind is HeadKind.GRAPH_SOFTMAX and head.readout is Readout.FLATTEN:
            width = channels * self.graphs[-1].n
        for j, hidden in enumerate(head.hidden + [head.outputs]):
            linear = Linear(width, hidden, rng=rng)
            self.add_module(f"head.{j}", linear)
            self.head_layers.append(linear)
            width = hidden
        if head.dropout > 0:
            for j in range(len(head.hidden)):
                dropout = Dropout(head.dropout, seed=self.seed * 1009 + 500 + j)
                self.add_module(f"head_dropout.{j}", dropout)
                self.head_dropouts.append(dropout)

    @property
    def nodes(self) -> int:
        return self.graphs[0].n

    def forward(self, x: Tensor, batch: int = 1) -> Tensor:
        expected = (self.nodes * batch, self.spec.in_channels)
        if x.shape != expected:
            raise DimensionError("model input has the wrong shape", shapes=[x.shape, expected])
        h = self.embedding(x, batch) if self.embedding is not None else x
        for block in self.blocks:
            h = block.layer(h, self.graphs[block.level], batch)
            h = apply_activation(block.spec.activation, h)
            if block.dropout is not None:
                h = block.dropout(h)
            if block.pool_level is not None:
                h = pool_apply(self.pool_maps[block.pool_level], h, batch)
        return self._head(h, batch)

    def _head(self, h: Tensor, batch: int) -> Tensor:
        head = self.spec.head
        if head.kind is HeadKind.GRAPH_SOFTMAX:
            n = self.graphs[-1].n
            if head.readout is Readout.FLATTEN:
                h = ops.reshape(h, (batch, n * h.shape[1]))
            else:
                h = ops.cluster_pool(h, np.repeat(np.arange(batch), n), batch, mode="mean")
        last = len(self.head_layers) - 1
        for j, linear in enumerate(self.head_layers):
            h = linear(h)
            if j < last:
                h = apply_activation(head.activation, h)
                if self.head_dropouts:
                    h = self.head_dropouts[j](h)
        if head.kind is HeadKind.NODE_SIGMOID:
            h = ops.sigmoid(h)
        return h

    def predict(self, x: np.ndarray, batch: int = 1) -> np.ndarray:
        """
        Eval-mode forward without a tape. Node heads give a batch x n array;
        the classifier gives batch x classes probabilities.
        """
        was_training = self.training
        self.eval()
        try:
            out = self.forward(Tensor(x), batch).numpy()
        finally:
            self.train(was_training)
        if self.spec.head.kind is HeadKind.GRAPH_SOFTMAX:
            shifted = out - out.max(axis=1, keepdims=True)
            e = np.exp(shifted)
            return e / e.sum(axis=1, keepdims=True)
        return out.reshape(batch, self.nodes)

    def manifest(self) -> Dict[str, object]:
        return {"layer_kind": self.kind, "layers": [b.layer.manifest() for b in self.blocks]}


def build_stack_for(spec: ModelSpec, base: NeighborGraph, seed: int = 0) -> GraphStack:
    """Graph stack whose levels match the spec's neighbourhood sizes and pooling stages."""
    ks = spec.level_ks()
    base_level_kinds = [s.kind for s, level in zip(spec.layers, spec.layer_levels()) if level == 0]
    if not any(kind in NEIGHBORHOOD_KINDS for kind in base_level_kinds):
        # nothing reads level-0 neighbourhoods; keep the given graph as is
        ks[0] = base.k
    clusters = [p.clusters for p in spec.pools]
    for level, pool in enumerate(spec.pools):
        prev = base.n if level == 0 else spec.pools[level - 1].clusters
        if pool.clusters > prev:
            raise ConfigurationError(
                f"cannot pool {prev} nodes into {pool.clusters} clusters", layer_index=pool.after
            )
    return build_graph_stack(
        base.coords,
        ks,
        clusters,
        [p.mode for p in spec.pools],
        seed=seed,
        base=base,
    )


def build_model(spec: ModelSpec, stack: GraphStack, seed: int = 0) -> Model:
    """Instantiate ``spec`` on ``stack``; inconsistencies name the offending layer."""
    return Model(spec, stack, seed=seed)


def layer_param_count(spec: LayerSpec, shares: bool = False) -> int:
    P, Q = spec.in_channels, spec.out_channels
    kind = spec.kind
    if kind is LayerKind.LP:
        return 0
    if kind is LayerKind.GC:
        return P * Q
    if kind in (LayerKind.DSGC, LayerKind.MPNN):
        C = spec.groups if kind is LayerKind.DSGC else 1
        H = spec.hidden
        return P * Q + (0 if shares else (5 * H + H) + (H * C + C))
    if kind is LayerKind.MONET:
        return spec.kernels * (P * Q) + spec.kernels * 10
    if kind is LayerKind.CHEBY:
        return spec.order * P * Q
    if kind is LayerKind.DSC:
        return P * Q + Q * table_size(spec.radius)
    if kind is LayerKind.FULL:
        return P * Q * table_size(spec.radius)
    return P * Q + Q


def spec_param_count(spec: ModelSpec, nodes_per_level: Sequence[int]) -> int:
    """Trainable scalars of a built ``spec``, computed without building it."""
    total = nodes_per_level[0] * spec.embedding_dim
    channels = spec.input_width
    for layer in spec.layers:
        total += layer_param_count(layer, shares=layer.share_filter)
        channels = layer.out_channels
    head = spec.head
    width = channels
    if head.kind is HeadKind.GRAPH_SOFTMAX and head.readout is Readout.FLATTEN:
        width = channels * nodes_per_level[spec.levels - 1]
    for hidden in head.hidden + [head.outputs]:
        total += width * hidden + hidden
        width = hidden
    return total
