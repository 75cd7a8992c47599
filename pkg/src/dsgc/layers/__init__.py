from dsgc.layers.base import Module, glorot_uniform
from dsgc.layers.conv import (
    CONV_LAYERS,
    ChebyLayer,
    DscLayer,
    DsgcLayer,
    FullConvLayer,
    GcLayer,
    LpLayer,
    MonetLayer,
    MpnnLayer,
    cheby_conv,
    depthwise_separable_conv,
    dsgc_forward,
    filter_weights,
    full_conv,
    graph_conv,
    label_propagate,
    monet_conv,
    mpnn_conv,
    param_count,
)
from dsgc.layers.dense import Dropout, Linear, NodeEmbedding
from dsgc.layers.filters import FilterMLP, LookupFilter

__all__ = [
    "CONV_LAYERS",
    "ChebyLayer",
    "DscLayer",
    "DsgcLayer",
    "Dropout",
    "FilterMLP",
    "FullConvLayer",
    "GcLayer",
    "Linear",
    "LookupFilter",
    "LpLayer",
    "Module",
    "MonetLayer",
    "MpnnLayer",
    "NodeEmbedding",
    "cheby_conv",
    "depthwise_separable_conv",
    "dsgc_forward",
    "filter_weights",
    "full_conv",
    "glorot_uniform",
    "graph_conv",
    "label_propagate",
    "monet_conv",
    "mpnn_conv",
    "param_count",
]
