"""
Architecture presets for the benchmark task families.

Hidden widths are not prescribed anywhere for these tasks; presets fix small
desk-scale defaults and ``match_budget`` enlarges a baseline's width until its
parameter count matches a reference model.
"""

from typing import Any, Callable, List, Optional, Sequence

from dsgc.graph.coarsening import PoolMode
from dsgc.models.builder import spec_param_count
from dsgc.models.specs import (
    Activation,
    HeadKind,
    HeadSpec,
    LayerKind,
    LayerSpec,
    ModelSpec,
    PoolSpec,
    Readout,
)
from dsgc.utils.error_handlers import ParameterError

SIM_WIDTH = 16
SIM_GROUPS = 4
SIM_FILTER_HIDDEN = 16
FORECAST_LAYERS = 7
DEFAULT_EMBED_DIM = 4
BUDGET_TOLERANCE = 0.10


def conv_layer(
    operator: LayerKind,
    in_channels: int,
    out_channels: int,
    k: int = 9,
    groups: int = SIM_GROUPS,
    hidden: int = SIM_FILTER_HIDDEN,
    activation: Activation = Activation.TANH,
    dropout: float = 0.0,
    **options: Any,
) -> LayerSpec:
    """One conv layer; ``groups`` falls back to the largest divisor of ``out_channels`` it allows."""
    operator = LayerKind(operator)
    g = 1
    if operator is LayerKind.DSGC:
        g = max(d for d in range(1, min(groups, out_channels) + 1) if out_channels % d == 0)
    return LayerSpec(
        kind=operator,
        in_channels=in_channels,
        out_channels=out_channels,
        k=k,
        groups=g,
        hidden=hidden,
        activation=activation,
        dropout=dropout,
        **options,
    )


def _matched_width(
    operator: LayerKind,
    make: Callable[[LayerKind, int], ModelSpec],
    width: Optional[int],
    nodes: int,
) -> ModelSpec:
    """DSGC uses the default width; other operators get the width matching its budget."""
    if width is not None:
        return make(operator, width)
    if operator is LayerKind.DSGC:
        return make(operator, SIM_WIDTH)
    reference = spec_param_count(make(LayerKind.DSGC, SIM_WIDTH), [nodes])
    return match_budget(lambda w: make(operator, w), reference, [nodes])


def sim_task_preset(
    operator: LayerKind = LayerKind.DSGC,
    grid: Sequence[int] = (8, 8),
    width: Optional[int] = None,
    groups: int = SIM_GROUPS,
    hidden: int = SIM_FILTER_HIDDEN,
    **options: Any,
) -> ModelSpec:
    """
    Three conv layers (tanh, tanh, none) on the k=9 grid graph, then a per-node
    affine + sigmoid head. The last conv maps to one channel.

    Without an explicit ``width`` non-DSGC operators are widened to the DSGC
    preset's parameter count.
    """

    def make(op: LayerKind, w: int) -> ModelSpec:
        layers = [
            conv_layer(op, 1, w, groups=groups, hidden=hidden, **options),
            conv_layer(op, w, w, groups=groups, hidden=hidden, **options),
            conv_layer(op, w, 1, groups=groups, hidden=hidden, activation=Activation.NONE, **options),
        ]
        return ModelSpec(in_channels=1, layers=layers, head=HeadSpec(kind=HeadKind.NODE_SIGMOID))

    return _matched_width(LayerKind(operator), make, width, int(grid[0]) * int(grid[1]))


def ts_forecast_preset(
    operator: LayerKind = LayerKind.DSGC,
    *,
    nodes: int,
    window: int = 6,
    embed_dim: int = DEFAULT_EMBED_DIM,
    with_missing_mask: bool = True,
    width: Optional[int] = None,
    groups: int = SIM_GROUPS,
    hidden: int = SIM_FILTER_HIDDEN,
    k: int = 9,
    **options: Any,
) -> ModelSpec:
    """
    Seven conv layers over [window values, mask, embeddings] and a per-node
    regression head. ``nodes`` is the sensor count, which sizes the embedding
    table counted in the budget.
    """
    if nodes < 1:
        raise ParameterError("forecast graph needs at least one node", name="nodes", value=nodes)
    if window < 1:
        raise ParameterError("forecast window must be at least 1", name="window", value=window)
    raw = window + (1 if with_missing_mask else 0)

    def make(op: LayerKind, w: int) -> ModelSpec:
        layers: List[LayerSpec] = []
        channels = raw + embed_dim
        for _ in range(FORECAST_LAYERS):
            layers.append(conv_layer(op, channels, w, k=k, groups=groups, hidden=hidden, **options))
            channels = w
        return ModelSpec(
            in_channels=raw,
            layers=layers,
            head=HeadSpec(kind=HeadKind.NODE_REGRESSION),
            embedding_dim=embed_dim,
        )

    return _matched_width(LayerKind(operator), make, width, nodes)


def grid_classify_preset(
    operator: LayerKind = LayerKind.DSGC,
    nodes: int = 256,
    classes: int = 4,
    in_channels: int = 1,
    widths: Sequence[int] = (16, 32),
    ks: Sequence[int] = (16, 12),
    pool_factor: int = 4,
    mlp_hidden: int = 64,
    groups: int = SIM_GROUPS,
    hidden: int = SIM_FILTER_HIDDEN,
    **options: Any,
) -> ModelSpec:
    """
    (conv, conv, K-means max-pool) per stage, neighbourhoods shrinking per stage,
    then a flattening two-layer MLP classifier with dropout 0.5.
    """
    if len(widths) != len(ks):
        raise ParameterError("need one neighbourhood size per stage", name="ks", value=list(ks))
    operator = LayerKind(operator)
    layers: List[LayerSpec] = []
    pools: List[PoolSpec] = []
    channels, level_nodes = in_channels, nodes
    for width, k in zip(widths, ks):
        k = min(k, level_nodes)
        for _ in range(2):
            layers.append(conv_layer(operator, channels, width, k=k, groups=groups, hidden=hidden, **options))
            channels = width
        level_nodes = max(1, level_nodes // pool_factor)
        pools.append(PoolSpec(after=len(layers) - 1, clusters=level_nodes, mode=PoolMode.MAX))
    return ModelSpec(
        in_channels=in_channels,
        layers=layers,
        pools=pools,
        head=HeadSpec(
            kind=HeadKind.GRAPH_SOFTMAX,
            hidden=[mlp_hidden],
            classes=classes,
            readout=Readout.FLATTEN,
            activation=Activation.RELU,
            dropout=0.5,
        ),
    )


def doc_classify_preset(
    operator: LayerKind = LayerKind.DSGC,
    classes: int = 4,
    width: int = 8,
    k: int = 9,
    mlp_hidden: int = 32,
    groups: int = SIM_GROUPS,
    hidden: int = SIM_FILTER_HIDDEN,
    **options: Any,
) -> ModelSpec:
    """Five conv layers with dropout 0.5 each, then a two-layer MLP classifier."""
    operator = LayerKind(operator)
    layers: List[LayerSpec] = []
    channels = 1
    for _ in range(5):
        layers.append(
            conv_layer(operator, channels, width, k=k, groups=groups, hidden=hidden, activation=Activation.RELU, dropout=0.5, **options)
        )
        channels = width
    return ModelSpec(
        in_channels=1,
        layers=layers,
        head=HeadSpec(
            kind=HeadKind.GRAPH_SOFTMAX,
            hidden=[mlp_hidden],
            classes=classes,
            readout=Readout.FLATTEN,
            activation=Activation.RELU,
            dropout=0.5,
        ),
    )


def match_budget(
    make_spec: Callable[[int], ModelSpec],
    target: int,
    nodes_per_level: Sequence[int],
    max_width: int = 1024,
) -> ModelSpec:
    """
    Smallest-error width for ``make_spec(width)`` against a reference parameter
    count (ties go to the narrower width).
    """
    best: Optional[ModelSpec] = None
    best_gap = None
    for width in range(1, max_width + 1):
        spec = make_spec(width)
        count = spec_param_count(spec, nodes_per_level)
        gap = abs(count - target)
        if best_gap is None or gap < best_gap:
            best, best_gap = spec, gap
        if count > target and best_gap is not None and gap > best_gap:
            break
    assert best is not None
    return best


def within_budget(count: int, reference: int, tolerance: float = BUDGET_TOLERANCE) -> bool:
    return abs(count - reference) <= tolerance * reference
