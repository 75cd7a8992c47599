"""
Synthetic multivariate sensor series.

Sensors sit uniformly in the unit square. Each reading is a superposition of
smooth travelling waves evaluated at the sensor position plus noise that
diffuses over the kNN graph, so nearby sensors are correlated. Entries are
deleted at the requested rate and recorded in a 0/1 mask.
"""

from typing import Optional

import numpy as np

from dsgc.data.schemas import DatasetFile, DatasetKind, GraphDocument
from dsgc.graph.spatial import knn_build, normalized_adjacency
from dsgc.training.forecast import chronological_bounds
from dsgc.utils.error_handlers import ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

SENSOR_K = 9
SENSOR_FIELDS = 3
NOISE_SCALE = 0.1
DIFFUSION = 0.5
NOISE_MEMORY = 0.8


def wave_fields(
    coords: np.ndarray,
    steps: int,
    rng: np.random.Generator,
    fields: int = SENSOR_FIELDS,
) -> np.ndarray:
    """Noiseless T x n signal: sum of plane waves a * sin(kappa . (x - v t) + phi) plus a daily cycle."""
    t = np.arange(steps, dtype=np.float64)[:, None]
    out = np.zeros((steps, coords.shape[0]))
    for _ in range(fields):
        amplitude = rng.uniform(0.5, 1.5)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        wavenumber = 2.0 * np.pi * rng.uniform(0.5, 1.5)
        kappa = wavenumber * np.array([np.cos(angle), np.sin(angle)])
        speed = rng.uniform(0.002, 0.01)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += amplitude * np.sin(coords @ kappa - wavenumber * speed * t + phase)
    out += 0.5 * np.sin(2.0 * np.pi * t / 24.0)
    return out


def median_neighbor_scale(coords: np.ndarray) -> np.ndarray:
    """Rescale coordinates so the median nearest-neighbour distance is 1."""
    if coords.shape[0] < 2:
        return coords.copy()
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, np.inf)
    median = float(np.median(dist.min(axis=1)))
    return coords / median if median > 0 else coords.copy()


def gen_synthetic_sensor_series(
    n: int = 50,
    steps: int = 2000,
    missing_rate: float = 0.1,
    seed: int = 0,
    k: int = SENSOR_K,
    fields: int = SENSOR_FIELDS,
    noise: float = NOISE_SCALE,
    coords: Optional[np.ndarray] = None,
) -> DatasetFile:
    """
    T x n readings with a Bernoulli(missing_rate) deletion mask. Deleted
    entries are stored as 0 with mask 0. ``coords`` overrides the random
    sensor placement (unit-square units).
    """
    if not 0.0 <= missing_rate < 1.0:
        raise ParameterError("missing rate must lie in [0, 1)", name="missing_rate", value=missing_rate)
    if steps < 2:
        raise ParameterError("series needs at least 2 steps", name="steps", value=steps)
    rng = np.random.default_rng(seed)
    positions = rng.random((n, 2)) if coords is None else np.asarray(coords, dtype=np.float64)
    n = positions.shape[0]
    scaled = median_neighbor_scale(positions)
    graph = knn_build(scaled, min(k, n))

    clean = wave_fields(positions, steps, rng, fields)

    # AR(1) noise smoothed by one diffusion step on the graph each tick.
    weights = normalized_adjacency(graph)
    values = np.empty((steps, n))
    state = np.zeros(n)
    for t in range(steps):
        spread = np.bincount(graph.dst, weights=weights * state[graph.src], minlength=n)
        state = NOISE_MEMORY * ((1.0 - DIFFUSION) * state + DIFFUSION * spread) + noise * rng.standard_normal(n)
        values[t] = clean[t] + state

    mask = (rng.random((steps, n)) >= missing_rate).astype(np.float64)
    values = np.where(mask > 0, values, 0.0)
    bounds = chronological_bounds(steps)
    logger.info(
        "sensor_series_generated",
        sensors=n,
        steps=steps,
        missing=float(1.0 - mask.mean()),
        seed=seed,
    )
    return DatasetFile(
        kind=DatasetKind.SERIES,
        task="sensors",
        seed=seed,
        graph=GraphDocument.model_validate(graph.to_document()),
        splits={name: list(range(lo, hi)) for name, (lo, hi) in bounds.items()},
        series=values.tolist(),
        mask=mask.tolist(),
        metadata={"missing_rate": missing_rate, "fields": fields, "noise": noise},
    )
