"""Scaled normalized graph Laplacian for Chebyshev filters."""

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from dsgc.graph.spatial import NeighborGraph
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

POWER_TOL = 1e-6
POWER_MAX_ITER = 1000
LAMBDA_CAP = 2.0


@dataclass(frozen=True, eq=False)
class LaplacianOperator:
    """
    Dense scaled Laplacian ``2 L / lambda_max - I``.

    ``converged`` is False when power iteration hit its cap and the bound
    fell back to 2 (the normalized Laplacian's spectral radius limit).
    """
    matrix: np.ndarray
    lambda_max: float
    converged: bool = True
    _cache: Dict[Any, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Non-zero entries as (dst, src, value) in row-major order."""
        if "edges" not in self._cache:
            dst, src = np.nonzero(self.matrix)
            self._cache["edges"] = (dst.astype(np.int64), src.astype(np.int64), self.matrix[dst, src])
        return self._cache["edges"]

    def batched_edges(self, size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges of ``size`` disjoint copies, copy b shifted by b*n."""
        key = ("batched", int(size))
        if key not in self._cache:
            dst, src, values = self.edges()
            shift = np.repeat(np.arange(size, dtype=np.int64) * self.n, dst.size)
            self._cache[key] = (np.tile(dst, size) + shift, np.tile(src, size) + shift, np.tile(values, size))
        return self._cache[key]


def symmetric_adjacency(g: NeighborGraph) -> np.ndarray:
    """Unit-weight adjacency with an edge wherever either direction exists; no self-loops."""
    adj = np.zeros((g.n, g.n), dtype=np.float64)
    off_diagonal = g.dst != g.src
    adj[g.dst[off_diagonal], g.src[off_diagonal]] = 1.0
    return np.maximum(adj, adj.T)


def normalized_laplacian(adj: np.ndarray) -> np.ndarray:
    """
    ``I - D^-1/2 A D^-1/2``.

    Isolated nodes get an all-zero row and column, which decouples them: their
    scaled row becomes ``-e_i``.
    """
    degree = adj.sum(axis=1)
    connected = degree > 0
    inv_sqrt = np.zeros_like(degree)
    inv_sqrt[connected] = 1.0 / np.sqrt(degree[connected])
    lap = -(inv_sqrt[:, None] * adj * inv_sqrt[None, :])
    lap[np.diag_indices_from(lap)] = connected.astype(np.float64)
    return lap


def power_iteration(
    matrix: np.ndarray,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    seed: int = 0,
) -> Tuple[float, float, bool]:
    """Dominant eigenvalue estimate of a symmetric PSD matrix: (rayleigh, residual, converged)."""
    n = matrix.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    rayleigh, residual = 0.0, np.inf
    for _ in range(max_iter):
        w = matrix @ v
        rayleigh = float(v @ w)
        residual = float(np.linalg.norm(w - rayleigh * v))
        if residual < tol * max(1.0, abs(rayleigh)):
            return rayleigh, residual, True
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, 0.0, True
        v = w / norm
    return rayleigh, residual, False


def scaled_laplacian(
    g: NeighborGraph,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    seed: int = 0,
) -> LaplacianOperator:
    """Build the scaled Laplacian of ``g``'s symmetrized kNN adjacency."""
    lap = normalized_laplacian(symmetric_adjacency(g))
    rayleigh, residual, converged = power_iteration(lap, tol=tol, max_iter=max_iter, seed=seed)
    if not converged:
        logger.warning("power_iteration_not_converged", nodes=g.n, iterations=max_iter, fallback=LAMBDA_CAP)
        lambda_max = LAMBDA_CAP
    elif rayleigh + residual < 1e-12:
        lambda_max = LAMBDA_CAP
    else:
        # Rayleigh quotient plus residual bounds the nearest eigenvalue from above
        lambda_max = min(rayleigh + residual, LAMBDA_CAP)
    scaled = (2.0 / lambda_max) * lap - np.eye(g.n)
    scaled = 0.5 * (scaled + scaled.T)
    return LaplacianOperator(matrix=scaled, lambda_max=float(lambda_max), converged=converged)
