"""Dataset schemas and the synthetic task generators."""

from dsgc.data.datasets import dataset_graph, dataset_to_task, load_dataset, save_dataset
from dsgc.data.documents import gen_synthetic_documents
from dsgc.data.schemas import (
    DATASET_VERSION,
    DatasetFile,
    DatasetKind,
    GraphDocument,
    locate_line,
    parse_json_document,
    read_json_document,
)
from dsgc.data.sensors import gen_synthetic_sensor_series
from dsgc.data.simulation import (
    Boundary,
    SimKind,
    SimTask,
    apply_sim_transform,
    gen_sim_dataset,
    gen_subsampled_grid,
    sim_target_map,
)

__all__ = [
    "Boundary",
    "DATASET_VERSION",
    "DatasetFile",
    "DatasetKind",
    "GraphDocument",
    "SimKind",
    "SimTask",
    "apply_sim_transform",
    "dataset_graph",
    "dataset_to_task",
    "gen_sim_dataset",
    "gen_subsampled_grid",
    "gen_synthetic_documents",
    "gen_synthetic_sensor_series",
    "load_dataset",
    "locate_line",
    "parse_json_document",
    "read_json_document",
    "save_dataset",
    "sim_target_map",
]
