"""
k-nearest-neighbour graphs over 2-D node coordinates.

Edges are stored as (dst, src) pairs grouped contiguously by destination, so
the per-node neighbourhoods double as segments for ``segment_softmax``. Every
node's own self-edge comes first in its segment, followed by the remaining
neighbours by increasing distance (ties by lower node index).
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from dsgc.utils.error_handlers import ContractError, ParameterError, StructuralError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

DELTA_DIM = 5
_ROW_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class NodeCoordinates:
    """n x 2 finite coordinates (pixels, lon/lat or embedding projections)."""
    coords: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ParameterError(f"coordinates must be n x 2, got shape {arr.shape}", name="coords")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("coordinates must be finite", name="coords")
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])


def as_coordinates(coords: Any) -> NodeCoordinates:
    return coords if isinstance(coords, NodeCoordinates) else NodeCoordinates(np.asarray(coords))


def edge_offset_feature(ci: Sequence[float], cj: Sequence[float]) -> np.ndarray:
    """(sign dx, |dx|, sign dy, |dy|, dx^2 + dy^2) with dx = xi - xj, dy = yi - yj."""
    return edge_offset_features(np.asarray([ci], dtype=np.float64), np.asarray([cj], dtype=np.float64))[0]


def edge_offset_features(ci: np.ndarray, cj: np.ndarray, period: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Row-wise offset features; ``period`` wraps offsets onto a torus."""
    offset = np.asarray(ci, dtype=np.float64) - np.asarray(cj, dtype=np.float64)
    if period is not None:
        offset = _wrap_offsets(offset, period)
    dx, dy = offset[:, 0], offset[:, 1]
    return np.stack([np.sign(dx), np.abs(dx), np.sign(dy), np.abs(dy), dx * dx + dy * dy], axis=1)


def _wrap_offsets(offset: np.ndarray, period: Tuple[float, float]) -> np.ndarray:
    p = np.asarray(period, dtype=np.float64)
    return offset - p * np.round(offset / p)


@dataclass(frozen=True, eq=False)
class NeighborGraph:
    """
    Per-node neighbour lists with per-edge offset features.

    ``offsets[i]:offsets[i+1]`` is node i's segment of the edge arrays.
    ``g_weight`` holds the row-normalized adjacency used by LP and GC.
    ``period`` is set for torus grids, whose offsets wrap around.
    """
    n: int
    k: int
    coords: np.ndarray
    dst: np.ndarray
    src: np.ndarray
    delta: np.ndarray
    offsets: np.ndarray
    g_weight: Optional[np.ndarray] = None
    period: Optional[Tuple[float, float]] = None
    _cache: Dict[Any, Any] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        counts = np.diff(self.offsets)
        if counts.shape != (self.n,) or np.any(counts != self.k):
            raise StructuralError("every node must own exactly k contiguous edges")
        if not np.array_equal(self.dst, np.repeat(np.arange(self.n), self.k)):
            raise StructuralError("edges must be grouped contiguously by destination")
        if self.delta.shape != (self.num_edges, DELTA_DIM):
            raise StructuralError(f"delta must be E x {DELTA_DIM}")

    @property
    def num_edges(self) -> int:
        return int(self.dst.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.src[self.offsets[i]:self.offsets[i + 1]]

    def with_normalized_adjacency(self) -> "NeighborGraph":
        if self.g_weight is not None:
            return self
        return replace(self, g_weight=normalized_adjacency(self), _cache={})

    def batch(self, size: int) -> "GraphBatch":
        """Block-diagonal replication for ``size`` signals on this graph."""
        key = ("batch", int(size))
        if key not in self._cache:
            self._cache[key] = GraphBatch(self, int(size))
        return self._cache[key]

    def permute(self, order: Sequence[int]) -> "NeighborGraph":
        """Relabel nodes so that new node a is old node ``order[a]``."""
        order = np.asarray(order, dtype=np.int64)
        if sorted(order.tolist()) != list(range(self.n)):
            raise ParameterError("order must be a permutation of the node indices", name="order")
        inverse = np.empty_like(order)
        inverse[order] = np.arange(self.n)
        new_dst, new_src = inverse[self.dst], inverse[self.src]
        perm = np.argsort(new_dst, kind="stable")
        return NeighborGraph(
            n=self.n,
            k=self.k,
            coords=self.coords[order],
            dst=new_dst[perm],
            src=new_src[perm],
            delta=self.delta[perm],
            offsets=self.offsets.copy(),
            g_weight=None if self.g_weight is None else self.g_weight[perm],
            period=self.period,
        )

    def to_document(self) -> Dict[str, Any]:
        """JSON document {n, k, coords, edges:[{dst, src, delta}]}."""
        doc: Dict[str, Any] = {
            "n": self.n,
            "k": self.k,
            "coords": self.coords.tolist(),
            "edges": [
                {"dst": int(d), "src": int(s), "delta": row}
                for d, s, row in zip(self.dst.tolist(), self.src.tolist(), self.delta.tolist())
            ],
        }
        if self.period is not None:
            doc["period"] = list(self.period)
        return doc

    @classmethod
    def from_document(cls, doc: Dict[str, Any]) -> "NeighborGraph":
        n, k = int(doc["n"]), int(doc["k"])
        edges = doc["edges"]
        period = doc.get("period")
        return cls(
            n=n,
            k=k,
            coords=np.asarray(doc["coords"], dtype=np.float64).reshape(n, 2),
            dst=np.asarray([e["dst"] for e in edges], dtype=np.int64),
            src=np.asarray([e["src"] for e in edges], dtype=np.int64),
            delta=np.asarray([e["delta"] for e in edges], dtype=np.float64).reshape(len(edges), DELTA_DIM),
            offsets=np.arange(0, n * k + 1, k, dtype=np.int64),
            period=None if period is None else (float(period[0]), float(period[1])),
        )


@dataclass(frozen=True, eq=False)
class GraphBatch:
    """Edge lists of ``size`` disjoint copies of one graph; copy b owns nodes b*n..b*n+n-1."""
    graph: NeighborGraph
    size: int
    src: np.ndarray = field(init=False)
    dst: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        shift = np.repeat(np.arange(self.size, dtype=np.int64) * self.graph.n, self.graph.num_edges)
        object.__setattr__(self, "src", np.tile(self.graph.src, self.size) + shift)
        object.__setattr__(self, "dst", np.tile(self.graph.dst, self.size) + shift)

    @property
    def num_nodes(self) -> int:
        return self.graph.n * self.size


def _knn_edges(pts: np.ndarray, k: int, period: Optional[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    n = pts.shape[0]
    src = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        if period is not None:
            diff = _wrap_offsets(diff, period)
        dist = (diff * diff).sum(axis=-1)
        rows = np.arange(stop - start)
        # self first, even when another node shares its coordinates
        dist[rows, start + rows] = -1.0
        src[start:stop] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return np.repeat(np.arange(n, dtype=np.int64), k), src.reshape(-1)


def knn_build(coords: Any, k: int, period: Optional[Tuple[float, float]] = None) -> NeighborGraph:
    """
    Build the k-nearest-neighbour graph (self included) over 2-D coordinates.

    Ties in distance go to the lower node index.
    """
    coords = as_coordinates(coords)
    n = coords.n
    if k < 1 or k > n:
        raise ParameterError(f"k must satisfy 1 <= k <= n (n={n}), got {k}", name="k", value=k)
    dst, src = _knn_edges(coords.coords, k, period)
    delta = edge_offset_features(coords.coords[dst], coords.coords[src], period)
    logger.debug("knn_graph_built", nodes=n, k=k, edges=int(dst.size))
    return NeighborGraph(
        n=n,
        k=k,
        coords=coords.coords,
        dst=dst,
        src=src,
        delta=delta,
        offsets=np.arange(0, n * k + 1, k, dtype=np.int64),
        period=period,
    )


def normalized_adjacency(g: NeighborGraph) -> np.ndarray:
    """Uniform row-normalized weights G_ij = 1/k on each of node i's edges."""
    counts = np.diff(g.offsets)
    return 1.0 / np.repeat(counts, counts).astype(np.float64)


def grid_coordinates(height: int, width: int) -> NodeCoordinates:
    """Pixel centres of an H x W grid; node r*W + c sits at (x=c, y=r)."""
    rows, cols = np.divmod(np.arange(height * width), width)
    return NodeCoordinates(np.stack([cols, rows], axis=1).astype(np.float64))


def grid_graph(height: int, width: int, k: int = 9, wrap: bool = False) -> NeighborGraph:
    """kNN graph over grid pixels; ``wrap`` measures distances on the torus."""
    if wrap and min(height, width) < 3:
        raise ParameterError("a wrap-around grid needs at least 3 rows and columns", name="grid")
    period = (float(width), float(height)) if wrap else None
    return knn_build(grid_coordinates(height, width), k, period=period)


def grid_offset_row(dx: int, dy: int, radius: int = 1) -> int:
    """Lookup-table row of the offset (dx, dy), row-major over (dy, dx)."""
    side = 2 * radius + 1
    return (dy + radius) * side + (dx + radius)


def grid_offset_index(delta: np.ndarray, radius: int = 1) -> np.ndarray:
    """Map each edge's offset feature to its lookup-table row."""
    dx = delta[:, 0] * delta[:, 1]
    dy = delta[:, 2] * delta[:, 3]
    rdx, rdy = np.round(dx), np.round(dy)
    off_lattice = (np.abs(dx - rdx) > 1e-9) | (np.abs(dy - rdy) > 1e-9)
    out_of_window = (np.abs(rdx) > radius) | (np.abs(rdy) > radius)
    bad = off_lattice | out_of_window
    if np.any(bad):
        e = int(np.flatnonzero(bad)[0])
        raise ContractError(
            f"edge {e} has off-grid offset ({dx[e]:g}, {dy[e]:g}); lookup-table layers need a regular grid "
            f"with radius {radius}",
            metadata={"edge": e},
        )
    return grid_offset_row(rdx.astype(np.int64), rdy.astype(np.int64), radius)


def table_size(radius: int = 1) -> int:
    return (2 * radius + 1) ** 2
