"""
Tests for losses, metrics, the training loop, rolling forecasts and run
reports.
"""

import numpy as np
import pandas as pd
import pytest

from dsgc.core.optim import SGD
from dsgc.core.tensor import Parameter, Tape, Tensor, precision_scope
from dsgc.graph.spatial import knn_build
from dsgc.layers.dense import Linear
from dsgc.models import HeadKind, HeadSpec, LayerKind, LayerSpec, ModelSpec, build_model, build_stack_for
from dsgc.training import (
    ForecastWindows,
    TaskData,
    TaskKind,
    TrainConfig,
    TrainReport,
    bce_loss,
    chronological_bounds,
    cross_entropy_loss,
    error_rate,
    evaluate,
    mse_loss,
    persistence_rmse,
    rmse,
    rolling_forecast_eval,
    summarize_reports,
    train_loop,
    write_loss_curve,
)
from dsgc.training.tasks import check_splits, random_splits
from dsgc.utils.error_handlers import (
    ContractError,
    DatasetError,
    DimensionError,
    ParameterError,
    TrainingDivergenceError,
)


def regression_task(samples=20, seed=0, nan_targets=False):
    rng = np.random.default_rng(seed)
    graph = knn_build(rng.random((4, 2)), 2)
    x = rng.uniform(-1.0, 1.0, (samples, 4, 1))
    y = 2.0 * x[:, :, 0]
    if nan_targets:
        y[0, 0] = np.nan
    splits = {"train": np.arange(16), "val": np.arange(16, 18), "test": np.arange(18, samples)}
    return TaskData(kind=TaskKind.NODE_REGRESSION, graph=graph, inputs=x, targets=y, splits=splits)


def head_only_spec():
    return ModelSpec(in_channels=1, layers=[], head=HeadSpec(kind=HeadKind.NODE_REGRESSION))


class TestLosses:
    """Closed-form loss values and input contracts."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_bce_at_one_half(self):
        assert bce_loss(Tensor([0.5]), [1.0]).item() == pytest.approx(np.log(2.0))

    def test_bce_perfect_prediction_is_near_zero(self):
        assert bce_loss(Tensor([0.0, 1.0]), [0.0, 1.0]).item() <= 1e-6

    def test_bce_rejects_soft_targets(self):
        with pytest.raises(ContractError):
            bce_loss(Tensor([0.5]), [0.3])

    def test_cross_entropy_uniform_logits(self):
        logits = Tensor(np.zeros((3, 10)))
        assert cross_entropy_loss(logits, [0, 4, 9]).item() == pytest.approx(np.log(10.0))

    def test_cross_entropy_is_stable_for_large_logits(self):
        logits = Tensor([[1e4, 0.0], [0.0, 1e4]])
        assert cross_entropy_loss(logits, [0, 1]).item() == pytest.approx(0.0, abs=1e-9)

    def test_cross_entropy_rejects_out_of_range_labels(self):
        with pytest.raises(ContractError):
            cross_entropy_loss(Tensor(np.zeros((2, 3))), [0, 3])

    def test_masked_mse_ignores_missing_entries(self):
        loss = mse_loss(Tensor([1.0, 5.0]), [0.0, np.nan], mask=[1.0, 0.0])
        assert loss.item() == pytest.approx(1.0)

    def test_bce_size_mismatch(self):
        with pytest.raises(DimensionError):
            bce_loss(Tensor(np.full((4, 1), 0.5)), np.zeros(5))

    def test_mse_size_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss(Tensor(np.zeros((4, 1))), np.zeros(5))

    def test_mse_mask_size_mismatch(self):
        with pytest.raises(DimensionError):
            mse_loss(Tensor(np.zeros((4, 1))), np.zeros(4), mask=np.ones(3))

    def test_targets_are_reshaped_to_predictions(self):
        assert mse_loss(Tensor(np.ones((2, 2))), np.zeros(4)).item() == pytest.approx(1.0)

    def test_loss_gradients(self):
        pred = Parameter([0.3, 0.8])
        with Tape() as tape:
            loss = bce_loss(pred, [0.0, 1.0])
        tape.backward(loss)
        # d/dp of -mean(t ln p + (1-t) ln(1-p))
        np.testing.assert_allclose(pred.grad, [0.5 / 0.7, -0.5 / 0.8])


class TestMetrics:
    def test_rmse(self):
        assert rmse(np.array([1.0, 3.0]), np.array([3.0, 1.0])) == pytest.approx(2.0)

    def test_rmse_with_empty_mask_is_nan(self):
        assert np.isnan(rmse(np.ones(3), np.zeros(3), np.zeros(3)))

    def test_error_rate(self):
        scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
        assert error_rate(scores, [0, 1, 1]) == pytest.approx(1.0 / 3.0)


class TestSplits:
    def test_overlap_is_rejected(self):
        with pytest.raises(DatasetError):
            check_splits({"train": [0, 1], "val": [1], "test": [2]}, 3)

    def test_exhaustive_splits_cover_every_sample(self):
        with pytest.raises(DatasetError):
            check_splits({"train": [0], "val": [1], "test": []}, 3, exhaustive=True)

    def test_random_splits_partition(self):
        splits = random_splits(100, (0.8, 0.1, 0.1), np.random.default_rng(0))
        assert [len(splits[s]) for s in ("train", "val", "test")] == [80, 10, 10]
        check_splits(splits, 100, exhaustive=True)


class TestTrainingLoop:
    """Convergence, determinism and divergence handling."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_single_weight_fits_y_equals_two_x(self):
        """Full-batch SGD drives the weight of y = w x to 2."""
        x = np.linspace(-1.0, 1.0, 11)[:, None]
        layer = Linear(1, 1, bias=False, rng=np.random.default_rng(0))
        optimizer = SGD(layer.named_parameters(), lr=0.5)
        tape = Tape()
        for _ in range(200):
            tape.reset()
            optimizer.zero_grad()
            with tape:
                loss = mse_loss(layer(Tensor(x)), 2.0 * x)
            tape.backward(loss)
            optimizer.step()
        assert layer.W.data[0, 0] == pytest.approx(2.0, abs=1e-3)

    def test_train_loop_converges(self):
        data = regression_task()
        spec = head_only_spec()
        model = build_model(spec, build_stack_for(spec, data.graph))
        cfg = TrainConfig(optimizer="sgd", lr=0.1, epochs=200, milestones=[], precision="f64")
        report = train_loop(model, data, cfg, name="linear")
        assert model.head_layers[0].W.data[0, 0] == pytest.approx(2.0, abs=1e-3)
        assert report.test_metric < 1e-3
        assert report.metric == "rmse"
        assert len(report.train_loss) == 200
        assert report.param_count == 2

    def test_same_seed_reproduces_loss_curve(self):
        data = regression_task()
        spec = ModelSpec(
            in_channels=1,
            layers=[LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=2, k=2, groups=2, hidden=4)],
            head=HeadSpec(kind=HeadKind.NODE_REGRESSION),
        )
        cfg = TrainConfig(optimizer="adam", lr=0.01, epochs=5, batch_size=4, seed=3)
        reports = []
        for _ in range(2):
            model = build_model(spec, build_stack_for(spec, data.graph, seed=3), seed=3)
            reports.append(train_loop(model, data, cfg))
        assert reports[0].without_timing() == reports[1].without_timing()

    def test_small_step_does_not_increase_loss(self):
        data = regression_task()
        spec = head_only_spec()
        cfg = TrainConfig(lr=1e-4, epochs=3, milestones=[])
        model = build_model(spec, build_stack_for(spec, data.graph))
        report = train_loop(model, data, cfg)
        assert report.train_loss[1] <= report.train_loss[0]
        assert report.train_loss[2] <= report.train_loss[1]

    def test_best_epoch_is_restored(self):
        data = regression_task()
        spec = head_only_spec()
        model = build_model(spec, build_stack_for(spec, data.graph))
        report = train_loop(model, data, TrainConfig(lr=0.1, epochs=20, milestones=[]))
        assert report.val_metric[report.best_epoch] == min(report.val_metric)
        assert evaluate(model, data, data.splits["val"]) == pytest.approx(report.val_metric[report.best_epoch])

    def test_non_finite_loss_raises(self):
        data = regression_task(nan_targets=True)
        spec = head_only_spec()
        model = build_model(spec, build_stack_for(spec, data.graph))
        with pytest.raises(TrainingDivergenceError) as info:
            train_loop(model, data, TrainConfig(epochs=2))
        assert info.value.epoch == 0

    def test_milestones_must_increase(self):
        with pytest.raises(ValueError):
            TrainConfig(milestones=[0.75, 0.5])


class TestForecastWindows:
    """Window construction, chronological splits and the persistence baseline."""

    def setup_method(self):
        self.steps, self.nodes = 50, 3
        rng = np.random.default_rng(0)
        self.series = rng.standard_normal((self.steps, self.nodes))
        self.mask = (rng.random((self.steps, self.nodes)) >= 0.2).astype(float)
        self.series[self.mask == 0] = 0.0

    def test_chronological_bounds(self):
        assert chronological_bounds(100) == {"train": (0, 60), "val": (60, 80), "test": (80, 100)}

    def test_windows_hold_the_true_history(self):
        w = ForecastWindows.from_series(self.series, self.mask, window=4)
        i = 10
        t = w.times[i]
        np.testing.assert_array_equal(w.inputs[i, :, :4], self.series[t - 4:t].T)
        np.testing.assert_array_equal(w.targets[i], self.series[t])

    def test_mask_channel_marks_missing_points(self):
        w = ForecastWindows.from_series(self.series, self.mask, window=4, with_mask=True)
        assert w.channels == 5
        np.testing.assert_array_equal(w.inputs[:, :, 4], self.mask[w.times - 1])
        np.testing.assert_array_equal(w.target_mask, self.mask[w.times])

    def test_without_mask_channel(self):
        assert ForecastWindows.from_series(self.series, self.mask, window=4, with_mask=False).channels == 4

    def test_nan_readings_count_as_missing(self):
        series = self.series.copy()
        series[20, 1] = np.nan
        w = ForecastWindows.from_series(series, window=3)
        i = int(np.flatnonzero(w.times == 20)[0])
        assert w.target_mask[i, 1] == 0.0
        assert w.targets[i, 1] == 0.0

    def test_splits_follow_time(self):
        w = ForecastWindows.from_series(self.series, self.mask, window=4)
        assert w.times[w.splits["train"]].max() < w.times[w.splits["val"]].min()
        assert w.times[w.splits["val"]].max() < w.times[w.splits["test"]].min()
        assert w.times[w.splits["test"]].max() == self.steps - 1

    def test_too_short_series(self):
        with pytest.raises(ParameterError):
            ForecastWindows.from_series(self.series[:4], window=4)

    def test_persistence_of_a_constant_series_is_exact(self):
        series = np.full((30, 2), 3.0)
        w = ForecastWindows.from_series(series, window=2)
        assert persistence_rmse(w) == pytest.approx(0.0)

    def test_rolling_eval_uses_the_model_graph(self):
        with precision_scope("f64"):
            graph = knn_build(np.random.default_rng(1).random((self.nodes, 2)), 2)
            spec = ModelSpec(in_channels=5, layers=[], head=HeadSpec(kind=HeadKind.NODE_REGRESSION))
            model = build_model(spec, build_stack_for(spec, graph))
            model.head_layers[0].W.data[...] = 0.0
            model.head_layers[0].W.data[3, 0] = 1.0
            # the model repeats the last window value, so it equals persistence
            expected = persistence_rmse(ForecastWindows.from_series(self.series, self.mask, window=4))
            got = rolling_forecast_eval(model, self.series, 4, self.mask)
            assert got == pytest.approx(expected)


class TestReports:
    def make(self, name, seed, test):
        return TrainReport(
            model=name,
            seed=seed,
            epochs=2,
            metric="rmse",
            train_loss=[1.0, 0.5 + seed],
            val_metric=[1.0, 0.9],
            best_epoch=1,
            test_metric=test,
            param_count=10,
        )

    def test_summary_mean_and_std(self):
        frame = summarize_reports([self.make("a", 0, 1.0), self.make("a", 1, 3.0), self.make("b", 0, 2.0)])
        row = frame.set_index("model").loc["a"]
        assert row["seeds"] == 2
        assert row["test_metric_mean"] == pytest.approx(2.0)
        assert row["test_metric_std"] == pytest.approx(np.sqrt(2.0))
        assert frame.set_index("model").loc["b", "test_metric_std"] == 0.0

    def test_loss_curve_csv(self, tmp_path):
        path = write_loss_curve(self.make("a", 0, 1.0), tmp_path / "curve.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["epoch", "train_loss", "val_metric"]
        assert frame["epoch"].tolist() == [0, 1]

    def test_series_must_match_epochs(self):
        with pytest.raises(ValueError):
            TrainReport(seed=0, epochs=3, metric="rmse", train_loss=[1.0], val_metric=[1.0],
                        best_epoch=0, test_metric=0.0, param_count=1)

    def test_nan_metric_round_trips(self, tmp_path):
        report = self.make("a", 0, float("nan"))
        path = tmp_path / "report.json"
        path.write_text(report.to_json())
        assert np.isnan(TrainReport.from_file(path).test_metric)
