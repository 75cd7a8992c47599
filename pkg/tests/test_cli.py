"""
Tests for the command-line interface and its exit codes.
"""

import json

import pytest
import typer
from typer.testing import CliRunner

from dsgc.cli import app
from dsgc.data import load_dataset
from dsgc.utils.error_handlers import (
    DatasetError,
    ParameterError,
    TrainingDivergenceError,
    cli_error_boundary,
    exit_code_for,
)
from dsgc.utils.logging import configure_logging

runner = CliRunner()


@pytest.fixture(autouse=True)
def restore_logging():
    """The app callback points logging at the runner's captured streams."""
    yield
    configure_logging("WARNING", "console")


@pytest.fixture
def sim_file(tmp_path):
    path = tmp_path / "shift.json"
    result = runner.invoke(
        app, ["gen-sim", "--task", "shift", "--grid", "4x4", "--samples", "20", "--seed", "3", "-o", str(path)]
    )
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def trained_run(sim_file, tmp_path):
    config = tmp_path / "run.json"
    config.write_text(
        json.dumps(
            {
                "dataset": sim_file.name,
                "output_dir": "runs",
                "seeds": [0],
                "train": {"epochs": 2, "lr": 0.05},
                "models": [{"name": "dsgc", "preset": "sim"}],
            }
        )
    )
    result = runner.invoke(app, ["train", "-c", str(config)])
    assert result.exit_code == 0, result.output
    return tmp_path / "runs"


class TestDatasetCommands:
    """Dataset generators write loadable files."""

    def test_gen_sim(self, sim_file):
        dataset = load_dataset(sim_file)
        assert dataset.task == "shift"
        assert dataset.graph.n == 16
        assert dataset.seed == 3

    def test_bad_grid(self, tmp_path):
        result = runner.invoke(app, ["gen-sim", "--task", "flip", "--grid", "8by8", "-o", str(tmp_path / "x.json")])
        assert result.exit_code == 2

    def test_rotation_needs_square_grid(self, tmp_path):
        result = runner.invoke(app, ["gen-sim", "--task", "rotation", "--grid", "4x5", "-o", str(tmp_path / "x.json")])
        assert result.exit_code == 1

    def test_gen_series(self, tmp_path):
        path = tmp_path / "series.json"
        result = runner.invoke(app, ["gen-series", "--sensors", "6", "--steps", "40", "-o", str(path)])
        assert result.exit_code == 0, result.output
        assert load_dataset(path).kind.value == "series"

    def test_gen_docs(self, tmp_path):
        path = tmp_path / "docs.json"
        result = runner.invoke(app, ["gen-docs", "--vocab", "30", "--docs", "20", "-o", str(path)])
        assert result.exit_code == 0, result.output

    def test_gen_grid(self, tmp_path):
        path = tmp_path / "grid.json"
        result = runner.invoke(app, ["gen-grid", "--grid", "8x8", "--keep", "0.5", "--samples", "8", "--k", "6",
                                     "-o", str(path)])
        assert result.exit_code == 0, result.output
        assert load_dataset(path).graph.n == 32


class TestTrainAndReport:
    """Training runs, evaluation and summaries."""

    def test_train_writes_reports(self, trained_run):
        assert (trained_run / "dsgc" / "seed_0" / "report.json").is_file()
        assert (trained_run / "summary.json").is_file()

    def test_report(self, trained_run, tmp_path):
        csv = tmp_path / "summary.csv"
        result = runner.invoke(app, ["report", str(trained_run), "--csv", str(csv)])
        assert result.exit_code == 0, result.output
        assert "dsgc" in result.output
        assert csv.read_text().startswith("model,seeds,param_count")

    def test_eval_saved_model(self, trained_run, sim_file):
        result = runner.invoke(
            app, ["eval", "--model", str(trained_run / "dsgc" / "seed_0"), "--dataset", str(sim_file)]
        )
        assert result.exit_code == 0, result.output
        assert "bce" in result.output

    def test_seeds_override_config(self, sim_file, tmp_path):
        config = tmp_path / "seeded.json"
        config.write_text(
            json.dumps(
                {
                    "dataset": sim_file.name,
                    "output_dir": "seeded",
                    "seeds": [0],
                    "train": {"epochs": 1},
                    "models": [{"name": "dsgc", "preset": "sim"}],
                }
            )
        )
        result = runner.invoke(app, ["train", "-c", str(config), "--seeds", "3,5"])
        assert result.exit_code == 0, result.output
        runs = tmp_path / "seeded" / "dsgc"
        assert sorted(p.name for p in runs.iterdir()) == ["seed_3", "seed_5"]

    @pytest.mark.parametrize("seeds", ["1,x", "2,2", ","])
    def test_bad_seeds_exit_2(self, sim_file, tmp_path, seeds):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"dataset": sim_file.name, "models": [{"name": "a", "preset": "sim"}]}))
        assert runner.invoke(app, ["train", "-c", str(config), "--seeds", seeds]).exit_code == 2

    def test_missing_config_exits_2(self, tmp_path):
        result = runner.invoke(app, ["train", "-c", str(tmp_path / "absent.json")])
        assert result.exit_code == 2

    def test_missing_dataset_exits_2(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"dataset": "absent.json", "models": [{"name": "a", "preset": "sim"}]}))
        result = runner.invoke(app, ["train", "-c", str(config)])
        assert result.exit_code == 2

    def test_invalid_config_exits_2(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text('{\n  "dataset": "d.json",\n  "models": []\n}')
        result = runner.invoke(app, ["train", "-c", str(config)])
        assert result.exit_code == 2
        assert "line 3" in result.output

    def test_report_on_empty_directory(self, tmp_path):
        assert runner.invoke(app, ["report", str(tmp_path)]).exit_code == 2


class TestGradcheckCommand:
    def test_dsgc_passes(self):
        result = runner.invoke(app, ["gradcheck", "--layer", "dsgc"])
        assert result.exit_code == 0, result.output
        assert "FAIL" not in result.output

    def test_monet_gat(self):
        result = runner.invoke(app, ["gradcheck", "--layer", "monet", "--gat"])
        assert result.exit_code == 0, result.output
        assert "monet_gat" in result.output

    def test_unknown_layer(self):
        assert runner.invoke(app, ["gradcheck", "--layer", "nope"]).exit_code == 2


class TestErrorBoundary:
    """Engine errors become the documented exit codes."""

    def test_exit_codes(self):
        assert exit_code_for(DatasetError("missing")) == 2
        assert exit_code_for(TrainingDivergenceError("loss became nan", epoch=4)) == 3
        assert exit_code_for(ParameterError("bad", name="k", value=0)) == 1
        assert exit_code_for(ValueError("plain")) == 1

    def test_boundary_raises_exit(self):
        @cli_error_boundary
        def diverge():
            raise TrainingDivergenceError("loss became nan", epoch=2)

        with pytest.raises(typer.Exit) as info:
            diverge()
        assert info.value.exit_code == 3
