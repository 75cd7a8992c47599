"""Dataset file IO and conversion to in-memory tasks."""

from pathlib import Path
from typing import Union

import numpy as np

from dsgc.data.schemas import DatasetFile, DatasetKind, read_json_document
from dsgc.graph.spatial import NeighborGraph
from dsgc.training.forecast import ForecastWindows
from dsgc.training.tasks import TaskData, TaskKind, check_splits
from dsgc.utils.error_handlers import DatasetError, EngineError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)


def save_dataset(dataset: DatasetFile, path: Union[str, Path]) -> Path:
    """UTF-8 JSON with fields in schema order; identical datasets give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dataset.model_dump_json(), encoding="utf-8")
    logger.info("dataset_saved", path=str(path), kind=dataset.kind.value, samples=dataset.samples)
    return path


def load_dataset(path: Union[str, Path]) -> DatasetFile:
    dataset = read_json_document(path, DatasetFile, error_cls=DatasetError)
    check_splits({k: np.asarray(v, dtype=np.int64) for k, v in dataset.splits.items()}, dataset.samples, exhaustive=True)
    return dataset


def dataset_graph(dataset: DatasetFile) -> NeighborGraph:
    try:
        return NeighborGraph.from_document(dataset.graph.model_dump(exclude_none=True))
    except EngineError as exc:
        raise DatasetError(f"dataset graph is malformed: {exc.message}") from exc


def dataset_to_task(dataset: DatasetFile, window: int = 6, with_mask: bool = True) -> TaskData:
    """
    In-memory task for training. Series datasets are cut into rolling windows
    of length ``window``; their stored time-stamp splits are re-derived from
    the chronological 60/20/20 boundaries.
    """
    graph = dataset_graph(dataset)
    if dataset.kind is DatasetKind.SERIES:
        windows = ForecastWindows.from_series(np.asarray(dataset.series), np.asarray(dataset.mask), window, with_mask)
        return windows.to_task(graph)
    splits = {name: np.asarray(idx, dtype=np.int64) for name, idx in dataset.splits.items()}
    inputs = np.asarray(dataset.inputs, dtype=np.float64)
    if dataset.kind is DatasetKind.SIM:
        return TaskData(
            kind=TaskKind.NODE_BINARY,
            graph=graph,
            inputs=inputs,
            targets=np.asarray(dataset.targets, dtype=np.float64),
            splits=splits,
            metadata=dict(dataset.metadata),
        )
    return TaskData(
        kind=TaskKind.GRAPH_CLASS,
        graph=graph,
        inputs=inputs,
        targets=np.asarray(dataset.labels, dtype=np.int64),
        splits=splits,
        classes=dataset.classes,
        metadata=dict(dataset.metadata),
    )
