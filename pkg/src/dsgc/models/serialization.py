"""Save and restore trained models as a JSON manifest plus an ``.npz`` parameter blob."""

import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np

from dsgc.graph.coarsening import GraphStack
from dsgc.models.builder import Model
from dsgc.models.specs import ModelSpec
from dsgc.utils.error_handlers import ConfigurationError, DatasetError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

FORMAT_VERSION = 1
MANIFEST_FILE = "model.json"
BLOB_FILE = "model.npz"
_VERSION_KEY = "__format_version__"


def save_model(model: Model, directory: Union[str, Path]) -> Path:
    """Write ``model.json`` and ``model.npz`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "seed": model.seed,
        "dtype": str(model.parameters()[0].data.dtype) if model.parameters() else None,
        "param_count": model.param_count(),
        "spec": model.spec.model_dump(mode="json"),
        "layers": model.manifest()["layers"],
    }
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    arrays = {name: p.data for name, p in model.named_parameters()}
    arrays[_VERSION_KEY] = np.asarray(FORMAT_VERSION)
    with open(directory / BLOB_FILE, "wb") as fh:
        np.savez(fh, **arrays)
    logger.debug("model_saved", path=str(directory), params=manifest["param_count"])
    return directory


def read_manifest(directory: Union[str, Path]) -> Tuple[ModelSpec, int]:
    """Spec and seed of a saved model."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    if not manifest_path.exists() or not (directory / BLOB_FILE).exists():
        raise DatasetError(f"no saved model in {directory}", metadata={"path": str(directory)})
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model format version {manifest.get('format_version')!r}")
    return ModelSpec.model_validate(manifest["spec"]), int(manifest.get("seed", 0))


def load_model(directory: Union[str, Path], stack: GraphStack) -> Model:
    """Rebuild a saved model on ``stack``; parameters are restored bit for bit."""
    directory = Path(directory)
    spec, seed = read_manifest(directory)
    blob_path = directory / BLOB_FILE
    model = Model(spec, stack, seed=seed)
    with np.load(blob_path) as blob:
        if int(blob[_VERSION_KEY]) != FORMAT_VERSION:
            raise ConfigurationError("parameter blob version does not match the manifest")
        state = {name: blob[name] for name in blob.files if name != _VERSION_KEY}
    model.load_state_dict(state)
    return model
