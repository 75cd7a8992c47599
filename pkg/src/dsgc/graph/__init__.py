from dsgc.graph.coarsening import (
    CoarseningMap,
    GraphStack,
    PoolMode,
    build_graph_stack,
    kmeans_coarsen,
    pool_apply,
    unpool,
)
from dsgc.graph.laplacian import LaplacianOperator, scaled_laplacian
from dsgc.graph.spatial import (
    GraphBatch,
    NeighborGraph,
    NodeCoordinates,
    edge_offset_feature,
    grid_coordinates,
    grid_graph,
    grid_offset_index,
    grid_offset_row,
    knn_build,
    normalized_adjacency,
)

__all__ = [
    "CoarseningMap",
    "GraphBatch",
    "GraphStack",
    "LaplacianOperator",
    "NeighborGraph",
    "NodeCoordinates",
    "PoolMode",
    "build_graph_stack",
    "edge_offset_feature",
    "grid_coordinates",
    "grid_graph",
    "grid_offset_index",
    "grid_offset_row",
    "kmeans_coarsen",
    "knn_build",
    "normalized_adjacency",
    "pool_apply",
    "scaled_laplacian",
    "unpool",
]
