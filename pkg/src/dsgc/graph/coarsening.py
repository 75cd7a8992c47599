"""
K-means coarsening of node coordinates.

Each pooling stage clusters the current node coordinates; cluster centroids
become the nodes of the next resolution level and a cluster's feature row is
the mean or max over its members.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Tensor
from dsgc.graph.spatial import NeighborGraph, NodeCoordinates, as_coordinates, knn_build
from dsgc.utils.error_handlers import DimensionError, ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

KMEANS_MAX_ITER = 100


class PoolMode(str, Enum):
    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True, eq=False)
class CoarseningMap:
    """
    Node-to-cluster assignment with centroid coordinates.

    Clusters are numbered in order of their lowest member index, so the map
    does not depend on how k-means happened to seed them.
    """
    n: int
    m: int
    assignment: np.ndarray
    centroids: np.ndarray
    mode: PoolMode = PoolMode.MEAN
    objective_history: Tuple[float, ...] = ()
    _tiled: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.assignment.shape != (self.n,):
            raise ParameterError("assignment must cover every node", name="assignment")
        if np.any(np.bincount(self.assignment, minlength=self.m) == 0):
            raise ParameterError("every cluster must have at least one member", name="assignment")

    @property
    def coordinates(self) -> NodeCoordinates:
        return NodeCoordinates(self.centroids)

    def with_mode(self, mode: Union[str, PoolMode]) -> "CoarseningMap":
        return CoarseningMap(
            n=self.n,
            m=self.m,
            assignment=self.assignment,
            centroids=self.centroids,
            mode=PoolMode(mode),
            objective_history=self.objective_history,
        )

    def batched_assignment(self, size: int) -> np.ndarray:
        if size not in self._tiled:
            shift = np.repeat(np.arange(size, dtype=np.int64) * self.m, self.n)
            self._tiled[size] = np.tile(self.assignment, size) + shift
        return self._tiled[size]


def _sq_distances(pts: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = pts[:, None, :] - centroids[None, :, :]
    return (diff * diff).sum(axis=-1)


def _seed_centroids(pts: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; falls back to the first unchosen point once all distances vanish."""
    n = pts.shape[0]
    chosen = [int(rng.integers(n))]
    closest = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < m:
        total = closest.sum()
        if total <= 0.0:
            taken = np.zeros(n, dtype=bool)
            taken[chosen] = True
            nxt = int(np.flatnonzero(~taken)[0])
        else:
            nxt = int(rng.choice(n, p=closest / total))
        chosen.append(nxt)
        closest = np.minimum(closest, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def _repair_empty(assignment: np.ndarray, dist: np.ndarray, m: int) -> np.ndarray:
    """Give each empty cluster the point farthest from its centroid in the largest cluster."""
    assignment = assignment.copy()
    counts = np.bincount(assignment, minlength=m)
    moved = np.zeros(assignment.shape[0], dtype=bool)
    for empty in np.flatnonzero(counts == 0):
        largest = int(np.argmax(counts))
        members = np.flatnonzero((assignment == largest) & ~moved)
        far = members[np.argmax(dist[members, largest])]
        assignment[far] = empty
        moved[far] = True
        counts[largest] -= 1
        counts[empty] += 1
        logger.debug("kmeans_empty_cluster_repaired", cluster=int(empty), donor=largest, node=int(far))
    return assignment


def _centroids(pts: np.ndarray, assignment: np.ndarray, m: int) -> np.ndarray:
    counts = np.bincount(assignment, minlength=m).astype(np.float64)
    sums = np.stack([np.bincount(assignment, weights=pts[:, d], minlength=m) for d in range(pts.shape[1])], axis=1)
    return sums / counts[:, None]


def _objective(pts: np.ndarray, assignment: np.ndarray, centroids: np.ndarray) -> float:
    diff = pts - centroids[assignment]
    return float((diff * diff).sum())


def kmeans_coarsen(
    coords: Any,
    m: int,
    seed: int = 0,
    mode: Union[str, PoolMode] = PoolMode.MEAN,
    max_iter: int = KMEANS_MAX_ITER,
) -> CoarseningMap:
    """
    Cluster node coordinates into ``m`` groups with Lloyd's algorithm.

    Stops once assignments stop changing or after ``max_iter`` iterations.
    """
    coords = as_coordinates(coords)
    pts, n = coords.coords, coords.n
    if m < 1 or m > n:
        raise ParameterError(f"cluster count must satisfy 1 <= m <= n (n={n}), got {m}", name="m", value=m)

    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(pts, m, rng)
    assignment: Optional[np.ndarray] = None
    history: List[float] = []
    for _ in range(max_iter):
        dist = _sq_distances(pts, centroids)
        proposed = _repair_empty(np.argmin(dist, axis=1), dist, m)
        centroids = _centroids(pts, proposed, m)
        history.append(_objective(pts, proposed, centroids))
        if assignment is not None and np.array_equal(proposed, assignment):
            break
        assignment = proposed
    assert assignment is not None

    first_member = np.full(m, n, dtype=np.int64)
    np.minimum.at(first_member, assignment, np.arange(n))
    order = np.argsort(first_member, kind="stable")
    relabel = np.empty(m, dtype=np.int64)
    relabel[order] = np.arange(m)

    logger.debug("kmeans_coarsened", nodes=n, clusters=m, iterations=len(history), objective=history[-1])
    return CoarseningMap(
        n=n,
        m=m,
        assignment=relabel[assignment],
        centroids=centroids[order],
        mode=PoolMode(mode),
        objective_history=tuple(history),
    )


def pool_apply(cmap: CoarseningMap, x: Tensor, batch: int = 1) -> Tensor:
    """Pool node rows into cluster rows; ``x`` stacks ``batch`` signals of n rows each."""
    if x.ndim != 2 or x.shape[0] != cmap.n * batch:
        raise DimensionError("pool_apply: row count must equal nodes x batch", shapes=[x.shape, (cmap.n * batch, -1)])
    return ops.cluster_pool(x, cmap.batched_assignment(batch), cmap.m * batch, mode=cmap.mode.value)


def unpool(cmap: CoarseningMap, y: Tensor, batch: int = 1) -> Tensor:
    """Broadcast cluster rows back to their member nodes."""
    if y.ndim != 2 or y.shape[0] != cmap.m * batch:
        raise DimensionError("unpool: row count must equal clusters x batch", shapes=[y.shape, (cmap.m * batch, -1)])
    return ops.gather_rows(y, cmap.batched_assignment(batch))


@dataclass(frozen=True, eq=False)
class GraphStack:
    """One kNN graph per resolution level and the coarsening maps between them."""
    graphs: Tuple[NeighborGraph, ...]
    maps: Tuple[CoarseningMap, ...] = ()

    def __post_init__(self) -> None:
        if len(self.maps) != len(self.graphs) - 1:
            raise ParameterError("a graph stack needs one coarsening map between consecutive levels", name="maps")
        for level, cmap in enumerate(self.maps):
            if cmap.n != self.graphs[level].n or cmap.m != self.graphs[level + 1].n:
                raise ParameterError(f"coarsening map {level} does not connect its levels", name="maps")

    @property
    def levels(self) -> int:
        return len(self.graphs)

    def nodes_per_level(self) -> List[int]:
        return [g.n for g in self.graphs]


def build_graph_stack(
    coords: Any,
    ks: Sequence[int],
    clusters: Sequence[int] = (),
    modes: Sequence[Union[str, PoolMode]] = (),
    seed: int = 0,
    base: Optional[NeighborGraph] = None,
) -> GraphStack:
    """
    Level-0 kNN graph, then one K-means coarsening and centroid kNN graph per
    entry of ``clusters``. ``ks`` holds one neighbourhood size per level.
    """
    if len(ks) != len(clusters) + 1:
        raise ParameterError("need one neighbourhood size per level", name="ks", value=list(ks))
    modes = list(modes) or [PoolMode.MEAN] * len(clusters)
    if len(modes) != len(clusters):
        raise ParameterError("need one pooling mode per coarsening stage", name="modes", value=list(modes))

    coords = as_coordinates(coords)
    graph = base if base is not None and base.k == ks[0] else knn_build(coords, ks[0])
    graphs = [graph]
    maps = []
    for stage, (m, mode) in enumerate(zip(clusters, modes)):
        cmap = kmeans_coarsen(graphs[-1].coords, m, seed=seed + stage, mode=mode)
        maps.append(cmap)
        graphs.append(knn_build(cmap.coordinates, min(ks[stage + 1], m)))
    return GraphStack(graphs=tuple(graphs), maps=tuple(maps))
