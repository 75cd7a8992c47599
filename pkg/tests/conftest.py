"""Shared fixtures for the engine test suite."""

import numpy as np
import pytest

from dsgc.core.tensor import precision_scope
from dsgc.graph.spatial import NeighborGraph, grid_graph, knn_build
from dsgc.utils.logging import configure_logging


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    """Keep structlog output out of test reports."""
    configure_logging("WARNING", "console")


@pytest.fixture
def f64():
    """Run the test body in double precision."""
    with precision_scope("f64") as dtype:
        yield dtype


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def random_graph(rng) -> NeighborGraph:
    """Random 12-node kNN graph with k=5 and row-normalized weights."""
    return knn_build(rng.random((12, 2)), 5).with_normalized_adjacency()


@pytest.fixture
def torus_grid() -> NeighborGraph:
    """4 x 4 wrap-around grid: every node sees its full 3 x 3 window."""
    return grid_graph(4, 4, k=9, wrap=True).with_normalized_adjacency()


def dense_operator(graph: NeighborGraph, weights: np.ndarray) -> np.ndarray:
    """n x n matrix with weights[e] at (dst[e], src[e])."""
    out = np.zeros((graph.n, graph.n))
    np.add.at(out, (graph.dst, graph.src), weights)
    return out
