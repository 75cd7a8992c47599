"""
Filter-weight predictors.

A predictor maps the E x 5 edge offset features of a graph to E x C logits,
one per channel group. ``FilterMLP`` learns that map; ``LookupFilter`` reads
it from a fixed table keyed by grid offset.
"""

from typing import Any, Dict, Optional

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Tensor
from dsgc.graph.spatial import DELTA_DIM, grid_offset_index, table_size
from dsgc.layers.base import Module, glorot_uniform
from dsgc.utils.error_handlers import DimensionError, ParameterError

DEFAULT_FILTER_HIDDEN = 256


class FilterMLP(Module):
    """Two-layer tanh MLP from the offset feature to C group logits."""

    kind = "filter_mlp"

    def __init__(
        self,
        groups: int,
        hidden: int = DEFAULT_FILTER_HIDDEN,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if groups < 1 or hidden < 1:
            raise ParameterError("filter MLP needs groups >= 1 and hidden >= 1", name="groups", value=groups)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.groups = groups
        self.hidden = hidden
        self.W1 = self.register_parameter("W1", glorot_uniform(rng, DELTA_DIM, hidden))
        self.b1 = self.register_parameter("b1", np.zeros(hidden))
        # zero output layer: every edge starts with the same logit
        self.W2 = self.register_parameter("W2", np.zeros((hidden, groups)))
        self.b2 = self.register_parameter("b2", np.zeros(groups))

    def forward(self, delta: np.ndarray) -> Tensor:
        if delta.ndim != 2 or delta.shape[1] != DELTA_DIM:
            raise DimensionError("filter input must be E x 5 offset features", shapes=[delta.shape])
        h = ops.tanh(ops.add_bias(ops.matmul(Tensor(delta), self.W1), self.b1))
        return ops.add_bias(ops.matmul(h, self.W2), self.b2)

    def manifest(self) -> Dict[str, Any]:
        return {"layer_kind": self.kind, "H": self.hidden, "C": self.groups}


class LookupFilter(Module):
    """
    Fixed logits per grid offset.

    ``table`` is R x C with R = (2 * radius + 1) ** 2 rows ordered as
    ``grid_offset_row``. Has no trainable parameters.
    """

    kind = "lookup_filter"

    def __init__(self, table: np.ndarray, radius: int = 1):
        super().__init__()
        table = np.asarray(table, dtype=np.float64)
        if table.ndim == 1:
            table = table[:, None]
        if table.shape[0] != table_size(radius):
            raise DimensionError("lookup table needs one row per grid offset", shapes=[table.shape, (table_size(radius), -1)])
        self.table = table
        self.radius = radius
        self.groups = table.shape[1]

    def forward(self, delta: np.ndarray) -> Tensor:
        return Tensor(self.table[grid_offset_index(delta, self.radius)])

    def manifest(self) -> Dict[str, Any]:
        return {"layer_kind": self.kind, "C": self.groups, "radius": self.radius}
