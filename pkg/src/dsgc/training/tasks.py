"""In-memory task data: stacked signals on one graph plus split indices."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from dsgc.graph.spatial import NeighborGraph
from dsgc.utils.error_handlers import DatasetError

SPLITS = ("train", "val", "test")


class TaskKind(str, Enum):
    NODE_BINARY = "node_binary"
    GRAPH_CLASS = "graph_class"
    NODE_REGRESSION = "node_regression"


@dataclass(frozen=True, eq=False)
class TaskData:
    """
    ``inputs`` is S x N x P. Node tasks carry S x N ``targets`` (with an
    optional 0/1 ``target_mask``); graph classification carries S labels.
    """
    kind: TaskKind
    graph: NeighborGraph
    inputs: np.ndarray
    targets: np.ndarray
    splits: Dict[str, np.ndarray]
    target_mask: Optional[np.ndarray] = None
    classes: int = 0
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.inputs.ndim != 3 or self.inputs.shape[1] != self.graph.n:
            raise DatasetError(
                f"inputs must be samples x {self.graph.n} nodes x channels, got {self.inputs.shape}"
            )
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise DatasetError("targets and inputs disagree on the sample count")
        check_splits(self.splits, self.inputs.shape[0])

    @property
    def samples(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def channels(self) -> int:
        return int(self.inputs.shape[2])

    def batch(self, indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        """Stacked (B*N) x P inputs with the matching targets and mask."""
        idx = np.asarray(indices, dtype=np.int64)
        x = self.inputs[idx].reshape(idx.size * self.graph.n, self.channels)
        mask = None if self.target_mask is None else self.target_mask[idx]
        return x, self.targets[idx], mask


def check_splits(splits: Dict[str, np.ndarray], samples: int, exhaustive: bool = False) -> None:
    """Splits must be disjoint, in range and (when ``exhaustive``) cover every sample."""
    missing = [name for name in SPLITS if name not in splits]
    if missing:
        raise DatasetError(f"dataset is missing split(s): {', '.join(missing)}")
    seen = np.zeros(samples, dtype=np.int64)
    for name in SPLITS:
        idx = np.asarray(splits[name], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= samples):
            raise DatasetError(f"split {name!r} indexes outside [0, {samples})")
        np.add.at(seen, idx, 1)
    if np.any(seen > 1):
        raise DatasetError("dataset splits overlap")
    if exhaustive and np.any(seen == 0):
        raise DatasetError("dataset splits do not cover every sample")


def random_splits(samples: int, fractions: Sequence[float], rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Shuffled train/val/test split by fraction; the remainder goes to test."""
    order = rng.permutation(samples)
    n_train = int(round(fractions[0] * samples))
    n_val = int(round(fractions[1] * samples))
    return {
        "train": np.sort(order[:n_train]),
        "val": np.sort(order[n_train:n_train + n_val]),
        "test": np.sort(order[n_train + n_val:]),
    }
