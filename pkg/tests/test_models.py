"""
Tests for model specs, the builder, architecture presets and model
serialization.
"""

import json

import numpy as np
import pytest

from dsgc.core.tensor import Tensor, precision_scope
from dsgc.graph.spatial import grid_graph, knn_build
from dsgc.models import (
    HeadKind,
    HeadSpec,
    LayerKind,
    LayerSpec,
    ModelSpec,
    PoolSpec,
    Readout,
    build_model,
    build_stack_for,
    load_model,
    read_manifest,
    save_model,
    spec_param_count,
)
from dsgc.models.presets import (
    BUDGET_TOLERANCE,
    SIM_WIDTH,
    doc_classify_preset,
    grid_classify_preset,
    match_budget,
    sim_task_preset,
    ts_forecast_preset,
    within_budget,
)
from dsgc.utils.error_handlers import ConfigurationError, DatasetError, DimensionError, ParameterError


def node_spec(*layers, in_channels=1):
    return ModelSpec(in_channels=in_channels, layers=list(layers), head=HeadSpec(kind=HeadKind.NODE_SIGMOID))


class TestBuilder:
    """Instantiating specs over graph stacks."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()
        self.graph = knn_build(np.random.default_rng(0).random((20, 2)), 5)

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def build(self, spec, seed=0):
        return build_model(spec, build_stack_for(spec, self.graph, seed=seed), seed=seed)

    def test_node_model_output_shapes(self):
        spec = node_spec(
            LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=4, k=5, groups=2, hidden=8),
            LayerSpec(kind=LayerKind.GC, in_channels=4, out_channels=1, k=5),
        )
        model = self.build(spec)
        x = np.random.default_rng(1).random((40, 1))
        out = model(Tensor(x), batch=2)
        assert out.shape == (40, 1)
        assert np.all((out.data > 0) & (out.data < 1))
        assert model.predict(x, batch=2).shape == (2, 20)

    def test_channel_mismatch_names_the_layer(self):
        spec = node_spec(
            LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=4, k=5),
            LayerSpec(kind=LayerKind.GC, in_channels=3, out_channels=1, k=5),
        )
        with pytest.raises(ConfigurationError, match="layer 1"):
            self.build(spec)

    def test_groups_must_divide_channels(self):
        spec = node_spec(LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=6, k=5, groups=4))
        with pytest.raises(ConfigurationError, match="layer 0"):
            self.build(spec)

    def test_neighbourhood_size_must_match_graph(self):
        spec = node_spec(LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=1, k=5))
        stack = build_stack_for(spec, self.graph)
        bad = node_spec(LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=1, k=7))
        with pytest.raises(ConfigurationError):
            build_model(bad, stack)

    def test_pool_cannot_grow_the_graph(self):
        spec = ModelSpec(
            in_channels=1,
            layers=[LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=2, k=5)],
            pools=[PoolSpec(after=0, clusters=40)],
            head=HeadSpec(kind=HeadKind.GRAPH_SOFTMAX, classes=2),
        )
        with pytest.raises(ConfigurationError):
            build_stack_for(spec, self.graph)

    def test_share_filter_needs_an_earlier_filter(self):
        spec = node_spec(
            LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=4, k=5, groups=2, share_filter=True)
        )
        with pytest.raises(ConfigurationError):
            self.build(spec)

    def test_shared_filter_is_counted_once(self):
        spec = node_spec(
            LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=4, k=5, groups=2, hidden=8),
            LayerSpec(kind=LayerKind.DSGC, in_channels=4, out_channels=4, k=5, groups=2, hidden=8, share_filter=True),
        )
        model = self.build(spec)
        assert model.param_count() == spec_param_count(spec, [20])
        assert model.blocks[1].layer.filter is model.blocks[0].layer.filter

    def test_pooled_classifier(self):
        spec = ModelSpec(
            in_channels=1,
            layers=[
                LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=4, k=5, groups=2, hidden=8),
                LayerSpec(kind=LayerKind.CHEBY, in_channels=4, out_channels=4, k=3),
            ],
            pools=[PoolSpec(after=0, clusters=5, mode="max")],
            head=HeadSpec(kind=HeadKind.GRAPH_SOFTMAX, hidden=[6], classes=3, readout=Readout.FLATTEN),
        )
        model = self.build(spec)
        assert [g.n for g in model.graphs] == [20, 5]
        probs = model.predict(np.ones((60, 1)), batch=3)
        assert probs.shape == (3, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        assert model.param_count() == spec_param_count(spec, [20, 5])

    def test_mean_readout(self):
        spec = ModelSpec(
            in_channels=1,
            layers=[LayerSpec(kind=LayerKind.MONET, in_channels=1, out_channels=3, k=5)],
            head=HeadSpec(kind=HeadKind.GRAPH_SOFTMAX, classes=2, readout=Readout.MEAN),
        )
        model = self.build(spec)
        assert model(Tensor(np.ones((40, 1))), batch=2).shape == (2, 2)

    def test_embeddings_widen_the_first_layer(self):
        spec = ModelSpec(
            in_channels=2,
            embedding_dim=3,
            layers=[LayerSpec(kind=LayerKind.GC, in_channels=5, out_channels=1, k=5)],
            head=HeadSpec(kind=HeadKind.NODE_REGRESSION),
        )
        model = self.build(spec)
        assert model.param_count() == spec_param_count(spec, [20])
        assert model.predict(np.zeros((20, 2))).shape == (1, 20)

    def test_input_shape_is_checked(self):
        model = self.build(node_spec(LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=1, k=5)))
        with pytest.raises(DimensionError):
            model(Tensor(np.ones((19, 1))))

    def test_same_seed_same_parameters(self):
        spec = node_spec(LayerSpec(kind=LayerKind.DSGC, in_channels=1, out_channels=4, k=5, groups=2, hidden=8))
        a, b = self.build(spec, seed=3).state_dict(), self.build(spec, seed=3).state_dict()
        for name in a:
            np.testing.assert_array_equal(a[name], b[name])


class TestPresets:
    """Task presets and parameter budget matching."""

    def test_sim_dsgc_preset(self):
        spec = sim_task_preset(LayerKind.DSGC)
        assert [layer.out_channels for layer in spec.layers] == [SIM_WIDTH, SIM_WIDTH, 1]
        assert spec_param_count(spec, [64]) == 731

    def test_graph_conv_is_widened_to_the_dsgc_budget(self):
        reference = spec_param_count(sim_task_preset(LayerKind.DSGC), [64])
        gc = sim_task_preset(LayerKind.GC)
        assert gc.layers[0].out_channels == 26
        assert within_budget(spec_param_count(gc, [64]), reference, BUDGET_TOLERANCE)

    @pytest.mark.parametrize("kind", [LayerKind.MPNN, LayerKind.MONET, LayerKind.CHEBY, LayerKind.FULL, LayerKind.DSC])
    def test_baselines_match_within_tolerance(self, kind):
        reference = spec_param_count(sim_task_preset(LayerKind.DSGC), [64])
        count = spec_param_count(sim_task_preset(kind), [64])
        assert within_budget(count, reference)

    def test_explicit_width_is_kept(self):
        assert sim_task_preset(LayerKind.GC, width=5).layers[0].out_channels == 5

    def test_match_budget_prefers_closest(self):
        def make(w):
            return node_spec(LayerSpec(kind=LayerKind.GC, in_channels=1, out_channels=w))

        spec = match_budget(make, target=12, nodes_per_level=[10])
        # 2w + 1 parameters: ties go to the narrower width
        assert spec.layers[0].out_channels == 5

    def test_forecast_preset_layout(self):
        spec = ts_forecast_preset(LayerKind.DSGC, window=6, embed_dim=4, width=8, nodes=30)
        assert len(spec.layers) == 7
        assert spec.in_channels == 7
        assert spec.layers[0].in_channels == 11
        assert spec.head.kind is HeadKind.NODE_REGRESSION

    def test_forecast_preset_without_mask(self):
        assert ts_forecast_preset(window=6, with_missing_mask=False, width=8, nodes=30).in_channels == 6

    def test_forecast_preset_needs_node_count(self):
        with pytest.raises(TypeError):
            ts_forecast_preset(LayerKind.GC, window=6)
        with pytest.raises(ParameterError):
            ts_forecast_preset(LayerKind.GC, nodes=0)

    def test_forecast_budget_counts_embeddings(self):
        reference = spec_param_count(ts_forecast_preset(LayerKind.DSGC, nodes=50), [50])
        gc = ts_forecast_preset(LayerKind.GC, nodes=50)
        assert within_budget(spec_param_count(gc, [50]), reference)

    def test_grid_classifier_pools_twice(self):
        spec = grid_classify_preset(LayerKind.DSGC, nodes=256, classes=4)
        assert [p.clusters for p in spec.pools] == [64, 16]
        assert spec.level_ks() == [16, 12]
        assert spec.head.dropout == 0.5

    def test_document_classifier(self):
        spec = doc_classify_preset(LayerKind.GC, classes=5)
        assert len(spec.layers) == 5
        assert all(layer.dropout == 0.5 for layer in spec.layers)
        assert spec.head.classes == 5


class TestSerialization:
    """Manifest plus parameter blob round trips."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()
        self.graph = grid_graph(4, 4, k=9)
        self.spec = sim_task_preset(LayerKind.DSGC, grid=(4, 4))

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_round_trip_restores_parameters_bitwise(self, tmp_path):
        model = build_model(self.spec, build_stack_for(self.spec, self.graph, seed=2), seed=2)
        for _, p in model.named_parameters():
            p.data += 0.01
        save_model(model, tmp_path / "m")
        spec, seed = read_manifest(tmp_path / "m")
        assert spec == self.spec
        assert seed == 2
        restored = load_model(tmp_path / "m", build_stack_for(spec, self.graph, seed=seed))
        for name, value in model.state_dict().items():
            assert restored.state_dict()[name].tobytes() == value.tobytes()
        x = np.random.default_rng(0).random((16, 1))
        np.testing.assert_array_equal(model.predict(x), restored.predict(x))

    def test_manifest_lists_layers(self, tmp_path):
        model = build_model(self.spec, build_stack_for(self.spec, self.graph))
        save_model(model, tmp_path)
        manifest = json.loads((tmp_path / "model.json").read_text())
        assert manifest["param_count"] == model.param_count()
        assert [layer["layer_kind"] for layer in manifest["layers"]] == ["dsgc", "dsgc", "dsgc"]

    def test_missing_model_is_a_dataset_error(self, tmp_path):
        with pytest.raises(DatasetError):
            read_manifest(tmp_path / "nothing")

    def test_version_mismatch(self, tmp_path):
        model = build_model(self.spec, build_stack_for(self.spec, self.graph))
        save_model(model, tmp_path)
        manifest = json.loads((tmp_path / "model.json").read_text())
        manifest["format_version"] = 99
        (tmp_path / "model.json").write_text(json.dumps(manifest))
        with pytest.raises(ConfigurationError):
            read_manifest(tmp_path)
