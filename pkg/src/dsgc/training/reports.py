"""
Training reports, loss-curve CSVs and cross-seed summaries.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

REPORT_VERSION = "v1"


class TrainReport(BaseModel):
    """Per-epoch series and final numbers of one (model, seed) run."""
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    version: str = REPORT_VERSION
    model: str = "model"
    seed: int
    precision: str = "f32"
    epochs: int
    metric: str
    train_loss: List[float]
    val_metric: List[float]
    best_epoch: int
    test_metric: float
    param_count: int
    wall_clock_seconds: float = 0.0
    extras: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _series_match_epochs(self) -> "TrainReport":
        if len(self.train_loss) != self.epochs or len(self.val_metric) != self.epochs:
            raise ValueError("loss and metric series must have one entry per epoch")
        return self

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    def without_timing(self) -> Dict[str, object]:
        return self.model_dump(exclude={"wall_clock_seconds"})

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "TrainReport":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def loss_curve_frame(report: TrainReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "epoch": range(report.epochs),
            "train_loss": report.train_loss,
            "val_metric": report.val_metric,
        }
    )


def write_loss_curve(report: TrainReport, path: Union[str, Path]) -> Path:
    """CSV with header epoch,train_loss,val_metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    loss_curve_frame(report).to_csv(path, index=False, float_format="%.10g")
    return path


def summarize_reports(reports: Sequence[TrainReport], baseline: Optional[str] = None) -> pd.DataFrame:
    """
    One row per model: seeds, parameter count, and mean/std of the final
    training loss and test metric over seeds. ``baseline`` names an ``extras``
    key to aggregate alongside.
    """
    rows = []
    for r in reports:
        row = {
            "model": r.model,
            "seed": r.seed,
            "param_count": r.param_count,
            "final_train_loss": r.train_loss[-1] if r.train_loss else float("nan"),
            "test_metric": r.test_metric,
        }
        if baseline is not None:
            row[baseline] = r.extras.get(baseline, float("nan"))
        rows.append(row)
    frame = pd.DataFrame(rows)
    if frame.empty:
        return frame
    value_cols = ["final_train_loss", "test_metric"] + ([baseline] if baseline else [])
    grouped = frame.groupby("model", sort=False)
    summary = grouped[value_cols].agg(["mean", "std"]).fillna(0.0)
    summary.columns = [f"{col}_{stat}" for col, stat in summary.columns]
    summary.insert(0, "param_count", grouped["param_count"].first())
    summary.insert(0, "seeds", grouped["seed"].count())
    return summary.reset_index()


def format_mean_std(mean: float, std: float, digits: int = 4) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"
