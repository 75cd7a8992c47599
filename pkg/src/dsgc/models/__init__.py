from dsgc.models.builder import (
    Model,
    apply_activation,
    build_model,
    build_stack_for,
    layer_param_count,
    make_layer,
    spec_param_count,
)
from dsgc.models.presets import (
    doc_classify_preset,
    grid_classify_preset,
    match_budget,
    sim_task_preset,
    ts_forecast_preset,
    within_budget,
)
from dsgc.models.serialization import load_model, read_manifest, save_model
from dsgc.models.specs import (
    Activation,
    HeadKind,
    HeadSpec,
    LayerKind,
    LayerSpec,
    ModelSpec,
    PoolSpec,
    Readout,
)

__all__ = [
    "Activation",
    "HeadKind",
    "HeadSpec",
    "LayerKind",
    "LayerSpec",
    "Model",
    "ModelSpec",
    "PoolSpec",
    "Readout",
    "apply_activation",
    "build_model",
    "build_stack_for",
    "doc_classify_preset",
    "grid_classify_preset",
    "layer_param_count",
    "load_model",
    "make_layer",
    "match_budget",
    "read_manifest",
    "save_model",
    "sim_task_preset",
    "spec_param_count",
    "ts_forecast_preset",
    "within_budget",
]
