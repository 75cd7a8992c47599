"""
Pydantic schemas describing model architectures.

A ``ModelSpec`` is plain data: it can be written inline in a run config,
produced by a preset, or stored next to trained weights.
"""

from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, Field

from dsgc.graph.coarsening import PoolMode
from dsgc.layers.filters import DEFAULT_FILTER_HIDDEN


# ==================== LAYERS ====================

class LayerKind(str, Enum):
    """Operator of one layer."""
    LP = "lp"
    GC = "gc"
    DSGC = "dsgc"
    MPNN = "mpnn"
    MONET = "monet"
    CHEBY = "cheby"
    DSC = "dsc"
    FULL = "full"
    LINEAR = "linear"


NEIGHBORHOOD_KINDS = frozenset(
    {LayerKind.LP, LayerKind.GC, LayerKind.DSGC, LayerKind.MPNN, LayerKind.MONET, LayerKind.CHEBY, LayerKind.DSC, LayerKind.FULL}
)


class Activation(str, Enum):
    NONE = "none"
    TANH = "tanh"
    RELU = "relu"
    SIGMOID = "sigmoid"


class LayerSpec(BaseModel):
    """One convolution (or per-node linear) layer."""
    model_config = ConfigDict(extra="forbid")

    kind: LayerKind
    in_channels: int = Field(ge=1)
    out_channels: int = Field(ge=1)
    k: int = Field(default=9, ge=1, description="Neighbourhood size of the layer's graph")
    groups: int = Field(default=1, ge=1, description="Channel groups C (dsgc)")
    hidden: int = Field(default=DEFAULT_FILTER_HIDDEN, ge=1, description="Filter MLP hidden width")
    normalize: bool = True
    order: int = Field(default=3, ge=1, description="Chebyshev order K")
    kernels: int = Field(default=2, ge=1, description="Gaussian kernels (monet)")
    gat_normalize: bool = False
    radius: int = Field(default=1, ge=1, description="Offset radius of grid lookup tables")
    share_filter: bool = False
    activation: Activation = Activation.TANH
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)


# ==================== POOLING ====================

class PoolSpec(BaseModel):
    """K-means pooling applied after layer ``after``."""
    model_config = ConfigDict(extra="forbid")

    after: int = Field(ge=0)
    clusters: int = Field(ge=1)
    mode: PoolMode = PoolMode.MEAN


# ==================== HEADS ====================

class HeadKind(str, Enum):
    NODE_SIGMOID = "node_sigmoid"
    NODE_REGRESSION = "node_regression"
    GRAPH_SOFTMAX = "graph_softmax"


class Readout(str, Enum):
    FLATTEN = "flatten"
    MEAN = "mean"


class HeadSpec(BaseModel):
    """Task head: optional hidden MLP then one output per node or class logits per graph."""
    model_config = ConfigDict(extra="forbid")

    kind: HeadKind
    hidden: List[int] = Field(default_factory=list)
    classes: int = Field(default=1, ge=1)
    readout: Readout = Readout.FLATTEN
    activation: Activation = Activation.TANH
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)

    @property
    def outputs(self) -> int:
        return self.classes if self.kind is HeadKind.GRAPH_SOFTMAX else 1


# ==================== MODEL ====================

class ModelSpec(BaseModel):
    """Layer stack, pooling stages, node embeddings and head."""
    model_config = ConfigDict(extra="forbid")

    in_channels: int = Field(ge=1, description="Channels of the raw input signal")
    layers: List[LayerSpec] = Field(default_factory=list)
    pools: List[PoolSpec] = Field(default_factory=list)
    head: HeadSpec
    embedding_dim: int = Field(default=0, ge=0)

    @property
    def input_width(self) -> int:
        """Channels entering the first layer (signal plus embeddings)."""
        return self.in_channels + self.embedding_dim

    @property
    def levels(self) -> int:
        return len(self.pools) + 1

    def layer_levels(self) -> List[int]:
        """Resolution level each layer runs at."""
        after = sorted(p.after for p in self.pools)
        return [sum(1 for a in after if a < i) for i in range(len(self.layers))]

    def level_ks(self) -> List[int]:
        """Neighbourhood size per level, taken from the layers running there (9 if none)."""
        ks = [0] * self.levels
        for spec, level in zip(self.layers, self.layer_levels()):
            if spec.kind in NEIGHBORHOOD_KINDS and level < self.levels:
                ks[level] = max(ks[level], spec.k)
        return [k or 9 for k in ks]
