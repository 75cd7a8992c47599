"""
Run configuration schema.

A run config is a JSON document naming a dataset, the training settings, the
seeds to run and the models to compare::

    {
      "dataset": "data/shift.json",
      "output_dir": "runs/shift",
      "seeds": [0, 1, 2],
      "protocol": "sim",
      "models": [
        {"name": "dsgc", "preset": "sim", "operator": "dsgc"},
        {"name": "gc", "preset": "sim", "operator": "gc", "match_budget_of": "dsgc"}
      ]
    }
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from dsgc.data.schemas import parse_json_document, read_json_document
from dsgc.models.specs import LayerKind, ModelSpec
from dsgc.training.loop import PROTOCOLS, TrainConfig, TrainingProtocol
from dsgc.utils.error_handlers import ConfigurationError


class PresetName(str, Enum):
    """Architecture families a model entry can start from."""
    SIM = "sim"
    FORECAST = "forecast"
    GRID_CLASSIFY = "grid_classify"
    DOC_CLASSIFY = "doc_classify"


class ModelEntry(BaseModel):
    """One model of a run: a preset with options, or an explicit spec."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.\-]+$")
    preset: Optional[PresetName] = None
    spec: Optional[ModelSpec] = None
    operator: LayerKind = LayerKind.DSGC
    options: Dict[str, Any] = Field(default_factory=dict)
    match_budget_of: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self) -> "ModelEntry":
        if (self.preset is None) == (self.spec is None):
            raise ValueError("give exactly one of 'preset' or 'spec'")
        if self.match_budget_of is not None and self.preset is None:
            raise ValueError("'match_budget_of' needs a preset whose width can vary")
        return self


class RunConfig(BaseModel):
    """Validated run configuration."""
    model_config = ConfigDict(extra="forbid")

    dataset: Path
    output_dir: Optional[Path] = None
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    parallel: int = Field(default=1, ge=1)
    protocol: Optional[TrainingProtocol] = None
    train: TrainConfig = Field(default_factory=TrainConfig)
    window: int = Field(default=6, ge=1, description="Forecast window for series datasets")
    with_missing_mask: bool = True
    models: List[ModelEntry] = Field(min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _protocol_defaults(cls, data: Any) -> Any:
        """A named protocol supplies the training settings; ``train`` entries override it."""
        if not isinstance(data, dict):
            return data
        protocol = data.get("protocol")
        train = data.get("train", {})
        if protocol not in tuple(p.value for p in TrainingProtocol) or not isinstance(train, dict):
            return data
        return {**data, "train": {**PROTOCOLS[TrainingProtocol(protocol)], **train}}

    @model_validator(mode="after")
    def _references(self) -> "RunConfig":
        seen: List[str] = []
        for entry in self.models:
            if entry.name in seen:
                raise ValueError(f"duplicate model name {entry.name!r}")
            if entry.match_budget_of is not None and entry.match_budget_of not in seen:
                raise ValueError(
                    f"model {entry.name!r} matches the budget of {entry.match_budget_of!r}, "
                    "which must be declared before it"
                )
            seen.append(entry.name)
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        return self

    def resolve_paths(self, base: Path) -> "RunConfig":
        """Relative dataset and output paths are taken from the config file's directory."""
        update: Dict[str, Path] = {}
        if not self.dataset.is_absolute():
            update["dataset"] = base / self.dataset
        if self.output_dir is not None and not self.output_dir.is_absolute():
            update["output_dir"] = base / self.output_dir
        return self.model_copy(update=update)


def parse_run_config(text: str, source: str = "<string>") -> RunConfig:
    return parse_json_document(text, RunConfig, source, ConfigurationError)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"run config not found: {path}")
    return read_json_document(path, RunConfig, ConfigurationError).resolve_paths(path.parent)
