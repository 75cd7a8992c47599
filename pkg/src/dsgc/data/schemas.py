"""
Pydantic schemas for dataset files, plus JSON loading that reports the line
of the offending key.
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dsgc.utils.error_handlers import ConfigurationError, DatasetError, EngineError

DATASET_VERSION = "v1"

M = TypeVar("M", bound=BaseModel)


# ==================== GRAPH DOCUMENTS ====================

class EdgeDocument(BaseModel):
    """One directed edge dst <- src with its offset feature."""
    model_config = ConfigDict(extra="forbid")

    dst: int = Field(ge=0)
    src: int = Field(ge=0)
    delta: List[float] = Field(min_length=5, max_length=5)


class GraphDocument(BaseModel):
    """Serialized ``NeighborGraph``."""
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    k: int = Field(ge=1)
    coords: List[List[float]]
    edges: List[EdgeDocument]
    period: Optional[List[float]] = None

    @model_validator(mode="after")
    def _consistent(self) -> "GraphDocument":
        if len(self.coords) != self.n or any(len(c) != 2 for c in self.coords):
            raise ValueError("coords must list n (x, y) pairs")
        if len(self.edges) != self.n * self.k:
            raise ValueError("graph must carry exactly k edges per node")
        if any(e.dst >= self.n or e.src >= self.n for e in self.edges):
            raise ValueError("edge endpoint outside the node range")
        return self


# ==================== DATASET FILES ====================

class DatasetKind(str, Enum):
    """Task family of a dataset file."""
    SIM = "sim"
    GRID = "grid"
    SERIES = "series"
    DOCS = "docs"


class DatasetFile(BaseModel):
    """
    A generated dataset on one graph.

    ``sim``, ``grid`` and ``docs`` carry S x N x P ``inputs``; ``sim`` has S x N
    binary ``targets`` and the others S integer ``labels``. ``series`` carries a
    T x N ``series`` with its 0/1 ``mask``, and its splits index time stamps.
    """
    model_config = ConfigDict(extra="forbid")

    version: Literal["v1"] = DATASET_VERSION
    kind: DatasetKind
    task: str
    seed: int
    graph: GraphDocument
    splits: Dict[str, List[int]]
    inputs: Optional[List[List[List[float]]]] = None
    targets: Optional[List[List[float]]] = None
    labels: Optional[List[int]] = None
    classes: int = 0
    series: Optional[List[List[float]]] = None
    mask: Optional[List[List[float]]] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _payload_matches_kind(self) -> "DatasetFile":
        if self.kind is DatasetKind.SERIES:
            if self.series is None or self.mask is None:
                raise ValueError("series datasets need 'series' and 'mask'")
            if len(self.series) != len(self.mask):
                raise ValueError("series and mask lengths differ")
            return self
        if self.inputs is None:
            raise ValueError(f"{self.kind.value} datasets need 'inputs'")
        if self.kind is DatasetKind.SIM:
            if self.targets is None or len(self.targets) != len(self.inputs):
                raise ValueError("sim datasets need one target row per sample")
        elif self.labels is None or len(self.labels) != len(self.inputs):
            raise ValueError(f"{self.kind.value} datasets need one label per sample")
        return self

    @property
    def samples(self) -> int:
        if self.kind is DatasetKind.SERIES:
            return len(self.series or [])
        return len(self.inputs or [])


# ==================== JSON LOADING ====================

def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t\r\n":
        pos += 1
    return pos


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def _member(text: str, pos: int, name: str, decoder: json.JSONDecoder) -> Optional[Tuple[int, int]]:
    """(key position, value position) of ``name`` in the object starting at ``pos``."""
    pos = _skip_ws(text, pos + 1)
    while pos < len(text) and text[pos] != "}":
        key_pos = pos
        key, pos = decoder.raw_decode(text, pos)
        pos = _skip_ws(text, pos)
        pos = _skip_ws(text, pos + 1)  # ':'
        if key == name:
            return key_pos, pos
        _, pos = decoder.raw_decode(text, pos)
        pos = _skip_ws(text, pos)
        if pos < len(text) and text[pos] == ",":
            pos = _skip_ws(text, pos + 1)
    return None


def locate_line(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    """Line of the deepest key or list element of ``loc`` present in ``text``."""
    decoder = json.JSONDecoder()
    pos = _skip_ws(text, 0)
    line: Optional[int] = None
    for key in loc:
        if pos >= len(text):
            break
        if isinstance(key, int) and text[pos] == "[":
            pos = _skip_ws(text, pos + 1)
            for _ in range(key):
                if pos >= len(text) or text[pos] == "]":
                    return line
                _, pos = decoder.raw_decode(text, pos)
                pos = _skip_ws(text, pos)
                if pos < len(text) and text[pos] == ",":
                    pos = _skip_ws(text, pos + 1)
            line = _line_of(text, pos)
        elif isinstance(key, str) and text[pos] == "{":
            found = _member(text, pos, key, decoder)
            if found is None:
                break
            line = _line_of(text, found[0])
            pos = found[1]
        else:
            break
    return line


def parse_json_document(
    text: str,
    schema: Type[M],
    source: str = "<string>",
    error_cls: Type[EngineError] = ConfigurationError,
) -> M:
    """
    Validate JSON ``text`` against ``schema``. Syntax and schema errors become
    ``error_cls`` naming the source and the line of the first offending key.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _document_error(error_cls, f"{source}: invalid JSON: {exc.msg}", exc.lineno) from exc
    try:
        return schema.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = [part for part in first["loc"] if isinstance(part, (str, int))]
        where = ".".join(str(p) for p in loc) or "<root>"
        line = locate_line(text, loc)
        raise _document_error(error_cls, f"{source}: {where}: {first['msg']}", line) from exc


def _document_error(error_cls: Type[EngineError], message: str, line: Optional[int]) -> EngineError:
    if issubclass(error_cls, ConfigurationError):
        return error_cls(message, line=line)
    if line is not None:
        message = f"line {line}: {message}"
    return error_cls(message, metadata={"line": line} if line is not None else {})


def read_json_document(path: Union[str, Path], schema: Type[M], error_cls: Type[EngineError] = ConfigurationError) -> M:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"file not found: {path}", metadata={"path": str(path)})
    return parse_json_document(path.read_text(encoding="utf-8"), schema, str(path), error_cls)
