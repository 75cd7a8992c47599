"""
Grid datasets: the shift/rotation/flip simulation tasks and subsampled-grid
image classification.

Every generator is a pure function of its seed.
"""

from enum import Enum
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dsgc.data.schemas import DatasetFile, DatasetKind, GraphDocument
from dsgc.graph.spatial import NeighborGraph, grid_coordinates, grid_graph, knn_build
from dsgc.training.tasks import random_splits
from dsgc.utils.error_handlers import DimensionError, ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

SIM_DENSITY = 0.3
SIM_K = 9
SIM_FRACTIONS = (0.8, 0.1, 0.1)
GRID_FRACTIONS = (0.8, 0.1, 0.1)
PATTERN_NOISE = 0.1


class SimKind(str, Enum):
    SHIFT = "shift"
    ROTATION = "rotation"
    FLIP = "flip"


class Boundary(str, Enum):
    """Shift boundary handling: wrap onto a torus or drop the pixels that leave the grid."""
    WRAP = "wrap"
    DROP = "drop"


class SimTask(BaseModel):
    """One simulation dataset request."""
    model_config = ConfigDict(extra="forbid")

    kind: SimKind
    height: int = Field(default=8, ge=1)
    width: int = Field(default=8, ge=1)
    samples: int = Field(default=2000, ge=1)
    seed: int = 0
    density: float = Field(default=SIM_DENSITY, gt=0.0, lt=1.0)
    boundary: Boundary = Boundary.WRAP


def sim_target_map(kind: SimKind, height: int, width: int, boundary: Boundary = Boundary.WRAP) -> np.ndarray:
    """
    ``dest[v]`` is the node pixel ``v`` moves to, or -1 when it leaves the grid.

    shift: (r, c) -> (r, c + 1); rotation: (r, c) -> (c, H - 1 - r);
    flip: (r, c) -> (r, W - 1 - c). Node r*W + c is pixel (r, c).
    """
    kind = SimKind(kind)
    if kind is SimKind.ROTATION and height != width:
        raise ParameterError(
            f"rotation needs a square grid, got {height}x{width}", name="grid", value=f"{height}x{width}"
        )
    rows, cols = np.divmod(np.arange(height * width, dtype=np.int64), width)
    if kind is SimKind.SHIFT:
        moved = cols + 1
        dest = rows * width + moved % width
        if Boundary(boundary) is Boundary.DROP:
            dest = np.where(moved < width, dest, -1)
        return dest
    if kind is SimKind.ROTATION:
        return cols * width + (height - 1 - rows)
    return rows * width + (width - 1 - cols)


def apply_sim_transform(signals: np.ndarray, dest: np.ndarray) -> np.ndarray:
    """Move each node's value to ``dest``; nodes nothing moves to become 0."""
    signals = np.asarray(signals)
    if signals.shape[-1] != dest.size:
        raise DimensionError("signal length differs from the target map", shapes=[signals.shape, dest.shape])
    out = np.zeros_like(signals)
    keep = dest >= 0
    out[..., dest[keep]] = signals[..., keep]
    return out


def sim_graph(task: SimTask) -> NeighborGraph:
    wrap = SimKind(task.kind) is SimKind.SHIFT and task.boundary is Boundary.WRAP
    return grid_graph(task.height, task.width, k=min(SIM_K, task.height * task.width), wrap=wrap)


def gen_sim_dataset(task: SimTask) -> DatasetFile:
    """
    Bernoulli(density) binary signals on an H x W grid with the transformed
    signal as per-node target. Shift with wrap-around uses the torus graph so
    every pixel sees a full 3x3 window.
    """
    dest = sim_target_map(task.kind, task.height, task.width, task.boundary)
    graph = sim_graph(task)
    rng = np.random.default_rng(task.seed)
    nodes = task.height * task.width
    inputs = (rng.random((task.samples, nodes)) < task.density).astype(np.float64)
    targets = apply_sim_transform(inputs, dest)
    splits = random_splits(task.samples, SIM_FRACTIONS, rng)
    logger.info("sim_dataset_generated", kind=task.kind.value, samples=task.samples, nodes=nodes, seed=task.seed)
    return DatasetFile(
        kind=DatasetKind.SIM,
        task=task.kind.value,
        seed=task.seed,
        graph=GraphDocument.model_validate(graph.to_document()),
        splits={name: idx.tolist() for name, idx in splits.items()},
        inputs=inputs[:, :, None].tolist(),
        targets=targets.tolist(),
        metadata={
            "height": task.height,
            "width": task.width,
            "density": task.density,
            "boundary": task.boundary.value,
        },
    )


# ==================== SUBSAMPLED GRIDS ====================

PATTERN_NAMES = ("horizontal_bar", "vertical_bar", "diagonal", "anti_diagonal", "plus", "cross")


def synthetic_pattern(label: int, height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """An oriented bar or cross through a random centre, with Gaussian pixel noise."""
    rows, cols = np.mgrid[0:height, 0:width]
    r = rng.integers(height // 4, max(height // 4 + 1, 3 * height // 4))
    c = rng.integers(width // 4, max(width // 4 + 1, 3 * width // 4))
    half = max(1, min(height, width) // 16)
    horizontal = np.abs(rows - r) < half
    vertical = np.abs(cols - c) < half
    diagonal = np.abs((rows - r) - (cols - c)) < half
    anti = np.abs((rows - r) + (cols - c)) < half
    shapes = (horizontal, vertical, diagonal, anti, horizontal | vertical, diagonal | anti)
    image = shapes[label].astype(np.float64)
    return image + PATTERN_NOISE * rng.standard_normal(image.shape)


def gen_subsampled_grid(
    height: int = 32,
    width: int = 32,
    keep: float = 0.25,
    samples: int = 1000,
    classes: int = 4,
    seed: int = 0,
    k: int = 16,
    images: Optional[np.ndarray] = None,
    labels: Optional[Sequence[int]] = None,
) -> DatasetFile:
    """
    Keep one shared random subset of pixels; the retained pixels become the
    nodes of a kNN graph. ``images`` (S x H x W or S x H x W x P) with
    ``labels`` replaces the synthetic bar/cross patterns.
    """
    if not 0.0 < keep <= 1.0:
        raise ParameterError("keep fraction must lie in (0, 1]", name="keep", value=keep)
    pixels = height * width
    retained = int(round(keep * pixels))
    if retained == 0:
        raise ParameterError("keep fraction retains no pixels", name="keep", value=keep)
    rng = np.random.default_rng(seed)
    node_pixels = np.sort(rng.choice(pixels, size=retained, replace=False))

    if images is None:
        if not 2 <= classes <= len(PATTERN_NAMES):
            raise ParameterError(
                f"synthetic patterns support 2..{len(PATTERN_NAMES)} classes", name="classes", value=classes
            )
        label_arr = rng.permutation(np.arange(samples) % classes)
        stack = np.stack([synthetic_pattern(int(y), height, width, rng) for y in label_arr])
    else:
        stack = np.asarray(images, dtype=np.float64)
        if labels is None or len(labels) != stack.shape[0]:
            raise ParameterError("images need one label each", name="labels")
        if stack.shape[1:3] != (height, width):
            raise DimensionError("images do not match the grid size", shapes=[stack.shape, (height, width)])
        label_arr = np.asarray(labels, dtype=np.int64)
        samples = stack.shape[0]
        classes = int(label_arr.max()) + 1
    if stack.ndim == 3:
        stack = stack[..., None]
    inputs = stack.reshape(samples, pixels, stack.shape[-1])[:, node_pixels, :]

    coords = grid_coordinates(height, width).coords[node_pixels]
    graph = knn_build(coords, min(k, retained))
    splits = random_splits(samples, GRID_FRACTIONS, rng)
    logger.info("grid_dataset_generated", nodes=retained, samples=samples, classes=classes, seed=seed)
    return DatasetFile(
        kind=DatasetKind.GRID,
        task="patterns" if images is None else "images",
        seed=seed,
        graph=GraphDocument.model_validate(graph.to_document()),
        splits={name: idx.tolist() for name, idx in splits.items()},
        inputs=inputs.tolist(),
        labels=label_arr.tolist(),
        classes=classes,
        metadata={"height": height, "width": width, "keep": keep, "pixels": node_pixels.tolist()},
    )
