"""Per-node dense layers, dropout and node embeddings."""

from typing import Any, Dict, Optional

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Tensor
from dsgc.layers.base import Module, glorot_uniform
from dsgc.utils.error_handlers import DimensionError, ParameterError


class Linear(Module):
    """x W + b applied to every row."""

    kind = "linear"

    def __init__(self, in_channels: int, out_channels: int, bias: bool = True, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.W = self.register_parameter("W", glorot_uniform(rng, in_channels, out_channels))
        self.b = self.register_parameter("b", np.zeros(out_channels)) if bias else None

    def forward(self, x: Tensor, *_: Any, **__: Any) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.in_channels:
            raise DimensionError("linear layer input channels mismatch", shapes=[x.shape, self.W.shape])
        y = ops.matmul(x, self.W)
        return y if self.b is None else ops.add_bias(y, self.b)

    def manifest(self) -> Dict[str, Any]:
        return {"layer_kind": self.kind, "P": self.in_channels, "Q": self.out_channels,
                "C": None, "H": None, "K": None, "normalize": None}


class Dropout(Module):
    """Inverted dropout; the identity in eval mode."""

    kind = "dropout"

    def __init__(self, rate: float, seed: int = 0):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ParameterError("dropout rate must lie in [0, 1)", name="rate", value=rate)
        self.rate = rate
        self._rng = np.random.default_rng(seed)

    def reseed(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def forward(self, x: Tensor, *_: Any, **__: Any) -> Tensor:
        if not self.training or self.rate == 0.0:
            return x
        keep = self._rng.random(x.shape) >= self.rate
        return ops.mul(x, Tensor(keep / (1.0 - self.rate)))


class NodeEmbedding(Module):
    """Trainable n x E table concatenated to the input channels of every signal."""

    kind = "embedding"

    def __init__(self, nodes: int, dim: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.nodes, self.dim = nodes, dim
        self.table = self.register_parameter("table", rng.normal(0.0, 0.1, size=(nodes, dim)))

    def forward(self, x: Tensor, batch: int = 1) -> Tensor:
        if x.shape[0] != self.nodes * batch:
            raise DimensionError("embedding rows must equal the input graph's node count", shapes=[x.shape, self.table.shape])
        return ops.concat([x, ops.tile_rows(self.table, batch)])
