"""
Finite-difference gradient checks for every layer kind.

Each check runs in f64 on a small random instance: parameters are redrawn
from N(0, 0.5^2) so zero-initialized weights do not hide terms, the loss is
``sum(layer(x) * R)`` for a fixed random ``R``, and every scalar of every
parameter group (and of the input) is perturbed by +-h.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from dsgc.core import ops
from dsgc.core.tensor import Parameter, Tape, Tensor, precision_scope
from dsgc.graph.laplacian import scaled_laplacian
from dsgc.graph.spatial import NeighborGraph, grid_graph, knn_build
from dsgc.models.builder import make_layer
from dsgc.models.specs import LayerKind, LayerSpec
from dsgc.utils.error_handlers import ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

STEP = 1e-5
TOLERANCE = 1e-4
GRAD_FLOOR = 1e-4
INIT_SCALE = 0.5
GRID_KINDS = frozenset({LayerKind.DSC, LayerKind.FULL})


@dataclass(frozen=True)
class GroupCheck:
    """Worst-case agreement of one parameter group."""

    name: str
    size: int
    max_abs_error: float
    max_rel_error: float
    passed: bool


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = GRAD_FLOOR) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor), elementwise."""
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / scale


def numeric_gradient(loss: Callable[[], float], value: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central differences of ``loss`` with respect to ``value``, perturbed in place."""
    grad = np.zeros_like(value)
    flat = value.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        up = loss()
        flat[i] = original - step
        down = loss()
        flat[i] = original
        out[i] = (up - down) / (2.0 * step)
    return grad


def check_graph(kind: LayerKind, nodes: int, k: int, seed: int) -> NeighborGraph:
    if kind in GRID_KINDS:
        # 3 x 4 torus: every node sees its full 3 x 3 window.
        return grid_graph(3, max(3, nodes // 3), k=9, wrap=True).with_normalized_adjacency()
    rng = np.random.default_rng(seed + 1)
    return knn_build(rng.random((nodes, 2)), min(k, nodes)).with_normalized_adjacency()


def gradcheck_layer(
    kind: LayerKind,
    in_channels: int = 3,
    out_channels: int = 4,
    groups: int = 2,
    nodes: int = 12,
    k: int = 5,
    hidden: int = 8,
    order: int = 3,
    kernels: int = 2,
    gat_normalize: bool = False,
    batch: int = 1,
    seed: int = 0,
    step: float = STEP,
    tolerance: float = TOLERANCE,
) -> List[GroupCheck]:
    """Per-group finite-difference comparison; the input signal is reported as group ``x``."""
    kind = LayerKind(kind)
    if kind is LayerKind.LINEAR:
        raise ParameterError("gradcheck covers graph layers only", name="layer", value=kind.value)
    with precision_scope("f64"):
        graph = check_graph(kind, nodes, k, seed)
        out_ch = in_channels if kind is LayerKind.LP else out_channels
        spec = LayerSpec(
            kind=kind,
            in_channels=in_channels,
            out_channels=out_ch,
            k=graph.k,
            groups=groups if kind is LayerKind.DSGC else 1,
            hidden=hidden,
            order=order,
            kernels=kernels,
            gat_normalize=gat_normalize,
        )
        rng = np.random.default_rng(seed)
        laplacian = scaled_laplacian(graph) if kind is LayerKind.CHEBY else None
        layer = make_layer(0, spec, laplacian, rng, None)
        for _, p in layer.named_parameters():
            p.data[...] = INIT_SCALE * rng.standard_normal(p.shape)

        x = Parameter(rng.standard_normal((graph.n * batch, in_channels)), name="x")
        projection = Tensor(rng.standard_normal((graph.n * batch, out_ch)))

        def forward() -> Tensor:
            return ops.sum(ops.mul(layer(x, graph, batch), projection))

        groups_to_check = list(layer.named_parameters()) + [("x", x)]
        for _, p in groups_to_check:
            p.zero_grad()
        with Tape() as tape:
            loss = forward()
        tape.backward(loss)

        results: List[GroupCheck] = []
        for name, p in groups_to_check:
            analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
            numeric = numeric_gradient(lambda: float(forward().item()), p.data, step)
            abs_err = float(np.max(np.abs(analytic - numeric))) if p.size else 0.0
            rel_err = float(np.max(relative_error(analytic, numeric))) if p.size else 0.0
            results.append(GroupCheck(name, int(p.size), abs_err, rel_err, rel_err <= tolerance))
    failed = [r.name for r in results if not r.passed]
    logger.info("gradcheck_complete", layer=kind.value, groups=len(results), failed=failed)
    return results


def gradcheck_all(seed: int = 0, kinds: Optional[List[LayerKind]] = None) -> dict:
    """Checks for every graph layer kind, MoNet both with and without neighbourhood normalization."""
    out = {}
    for kind in kinds or [k for k in LayerKind if k is not LayerKind.LINEAR]:
        out[kind.value] = gradcheck_layer(kind, seed=seed)
        if kind is LayerKind.MONET:
            out["monet_gat"] = gradcheck_layer(kind, gat_normalize=True, seed=seed)
    return out
