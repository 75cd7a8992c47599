"""
Tests for the differentiation tape, the optimizers and the differentiable
primitives, checked against analytic values, dense oracles and central
finite differences.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsgc.core import ops
from dsgc.core.optim import SGD, Adam, MultiStepSchedule, OptimizerKind, OptimizerState, optimizer_step
from dsgc.core.tensor import Parameter, Tape, Tensor, backward, current_dtype, precision_scope
from dsgc.experiments.gradcheck import numeric_gradient, relative_error
from dsgc.utils.error_handlers import (
    BoundsError,
    ContractError,
    DimensionError,
    ParameterError,
    StructuralError,
    TapeError,
)


def analytic_and_numeric(build, *params):
    """Gradients of ``sum(build())`` from the tape and from central differences."""
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = ops.sum(build())
    tape.backward(loss)
    results = []
    for p in params:
        numeric = numeric_gradient(lambda: float(ops.sum(build()).item()), p.data)
        results.append((p.grad.copy(), numeric))
    return results


class TestTape:
    """Recording, replay and precision scoping."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_operations_outside_a_tape_are_not_recorded(self):
        """Without an active tape results carry no creator."""
        a = Parameter(np.ones((2, 2)))
        out = ops.matmul(a, a)
        assert out.is_leaf
        assert not out.requires_grad

    def test_tape_records_in_execution_order(self):
        """Each differentiable call appends one entry."""
        a = Parameter(np.ones((2, 2)))
        with Tape() as tape:
            b = ops.tanh(a)
            ops.sum(ops.mul(b, b))
        assert len(tape) == 3

    def test_second_replay_is_rejected(self):
        """A tape replays once until reset."""
        a = Parameter(np.array([1.0, 2.0]))
        with Tape() as tape:
            loss = ops.sum(ops.square(a))
        tape.backward(loss)
        with pytest.raises(TapeError):
            tape.backward(loss)

    def test_reset_allows_recording_again(self):
        """reset() clears the record and the replayed flag."""
        a = Parameter(np.array([1.0, 2.0]))
        tape = Tape()
        for _ in range(2):
            tape.reset()
            a.zero_grad()
            with tape:
                loss = ops.sum(ops.square(a))
            tape.backward(loss)
        np.testing.assert_allclose(a.grad, [2.0, 4.0])

    def test_backward_needs_a_scalar_loss(self):
        """Non-scalar losses raise ContractError."""
        a = Parameter(np.ones((2, 2)))
        with Tape() as tape:
            out = ops.tanh(a)
        with pytest.raises(ContractError):
            tape.backward(out)

    def test_backward_without_tape_raises(self):
        """A loss computed outside any tape cannot be differentiated."""
        loss = ops.sum(Tensor(np.ones(3)))
        with pytest.raises(ContractError):
            backward(loss)

    def test_gradient_accumulates_once_per_use(self):
        """A tensor used twice receives the sum of both contributions."""
        a = Parameter(np.array([3.0]))
        with Tape() as tape:
            loss = ops.sum(ops.add(ops.scale(a, 2.0), ops.mul(a, a)))
        tape.backward(loss)
        # d/da (2a + a^2) = 2 + 2a
        np.testing.assert_allclose(a.grad, [8.0])

    def test_precision_scope_controls_dtype(self):
        """Tensors adopt the scoped precision and the scope restores on exit."""
        assert current_dtype() is np.float64
        with precision_scope("f32"):
            assert Tensor([1.0]).data.dtype == np.float32
        assert Tensor([1.0]).data.dtype == np.float64

    def test_unknown_precision_is_rejected(self):
        with pytest.raises(ParameterError):
            with precision_scope("f16"):
                pass

    def test_item_requires_single_element(self):
        with pytest.raises(ContractError):
            Tensor(np.ones(2)).item()


class TestPrimitiveGradients:
    """Analytic gradients against central finite differences."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()
        self.rng = np.random.default_rng(7)

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def assert_matches(self, build, *params, tol=1e-5):
        for analytic, numeric in analytic_and_numeric(build, *params):
            assert np.max(relative_error(analytic, numeric)) < tol

    def test_matmul_gradient(self):
        """Random 4x3 times 3x2: both operand gradients agree."""
        a = Parameter(self.rng.standard_normal((4, 3)))
        b = Parameter(self.rng.standard_normal((3, 2)))
        self.assert_matches(lambda: ops.matmul(a, b), a, b, tol=1e-6)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ops.matmul(Tensor(np.ones((4, 3))), Tensor(np.ones((2, 2))))

    def test_sigmoid_gradient_at_zero(self):
        """sigmoid'(0) = 0.25."""
        a = Parameter(np.zeros(1))
        with Tape() as tape:
            loss = ops.sum(ops.sigmoid(a))
        tape.backward(loss)
        np.testing.assert_allclose(a.grad, [0.25])

    @pytest.mark.parametrize("op", ["tanh", "relu", "sigmoid", "exp", "square"])
    def test_unary_gradients(self, op):
        """Elementwise nonlinearities away from the relu kink."""
        values = self.rng.standard_normal((3, 4))
        values[np.abs(values) < 0.1] = 0.5
        a = Parameter(values)
        fn = getattr(ops, op)
        self.assert_matches(lambda: ops.mul(fn(a), Tensor(values + 1.0)), a)

    def test_log_gradient(self):
        a = Parameter(self.rng.random((3, 3)) + 0.5)
        self.assert_matches(lambda: ops.log(a), a)

    def test_binary_gradients(self):
        a = Parameter(self.rng.standard_normal((3, 2)))
        b = Parameter(self.rng.standard_normal((3, 2)))
        self.assert_matches(lambda: ops.mul(ops.sub(a, b), ops.add(a, b)), a, b)

    def test_elementwise_dispatch(self):
        """elementwise('add', a, b) equals add(a, b)."""
        a, b = Tensor([1.0, 2.0]), Tensor([3.0, 5.0])
        np.testing.assert_array_equal(ops.elementwise("add", a, b).data, [4.0, 7.0])
        np.testing.assert_array_equal(ops.elementwise("scale", a, 3.0).data, [3.0, 6.0])

    def test_elementwise_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ops.add(Tensor(np.ones(3)), Tensor(np.ones(4)))

    def test_reduction_and_layout_gradients(self):
        """mean, reshape, transpose, concat, bias and take chain together."""
        a = Parameter(self.rng.standard_normal((4, 3)))
        bias = Parameter(self.rng.standard_normal(3))
        projection = Tensor(self.rng.standard_normal((6, 4)))

        def build():
            h = ops.add_bias(a, bias)
            h = ops.concat([h, ops.take(h, [3, 0, 1, 2], axis=0)])
            h = ops.mul(ops.transpose(h), projection)
            return ops.reshape(ops.scale(h, 0.5), (24,))

        self.assert_matches(build, a, bias)
        self.assert_matches(lambda: ops.mean(ops.square(a)), a)

    def test_repeat_and_tile_gradients(self):
        a = Parameter(self.rng.standard_normal((3, 2)))
        projection = Tensor(self.rng.standard_normal((6, 6)))
        self.assert_matches(lambda: ops.mul(ops.tile_rows(ops.repeat_columns(a, 3), 2), projection), a)


class TestSegmentSoftmax:
    """Softmax within contiguous segments."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_two_logits(self):
        """(0, ln 3) in one segment gives (0.25, 0.75)."""
        out = ops.segment_softmax(Tensor([0.0, np.log(3.0)]), [0, 2])
        np.testing.assert_allclose(out.data, [0.25, 0.75], atol=1e-12)

    def test_segments_are_independent(self):
        out = ops.segment_softmax(Tensor([1.0, 1.0, 5.0]), [0, 2, 3])
        np.testing.assert_allclose(out.data, [0.5, 0.5, 1.0])

    def test_empty_segment_raises(self):
        with pytest.raises(StructuralError):
            ops.segment_softmax(Tensor([1.0, 2.0]), [0, 0, 2])

    def test_boundaries_must_cover_all_rows(self):
        with pytest.raises(StructuralError):
            ops.segment_softmax(Tensor([1.0, 2.0, 3.0]), [0, 2])

    @settings(max_examples=50, deadline=None)
    @given(
        lengths=st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=6),
        magnitude=st.sampled_from([1.0, 100.0, 1e4]),
        seed=st.integers(min_value=0, max_value=2**16),
    )
    def test_segments_sum_to_one(self, lengths, magnitude, seed):
        """Holds for large-magnitude logits too."""
        with precision_scope("f64"):
            offsets = np.concatenate([[0], np.cumsum(lengths)])
            logits = magnitude * np.random.default_rng(seed).uniform(-1.0, 1.0, (offsets[-1], 2))
            out = ops.segment_softmax(Tensor(logits), offsets).data
            sums = np.add.reduceat(out, offsets[:-1], axis=0)
            assert np.all(np.isfinite(out))
            np.testing.assert_allclose(sums, 1.0, atol=1e-6)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        logits = Parameter(rng.standard_normal((7, 2)))
        projection = Tensor(rng.standard_normal((7, 2)))
        for analytic, numeric in analytic_and_numeric(
            lambda: ops.mul(ops.segment_softmax(logits, [0, 3, 4, 7]), projection), logits
        ):
            assert np.max(relative_error(analytic, numeric)) < 1e-6


class TestGatherScatter:
    """Weighted neighbourhood aggregation against a dense matrix oracle."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()
        self.rng = np.random.default_rng(11)
        self.n = 5
        self.src = self.rng.integers(0, self.n, 14)
        self.dst = np.sort(self.rng.integers(0, self.n, 14))
        self.x = self.rng.standard_normal((self.n, 3))

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_per_edge_weights_match_dense_product(self):
        w = self.rng.standard_normal(14)
        dense = np.zeros((self.n, self.n))
        np.add.at(dense, (self.dst, self.src), w)
        out = ops.gather_scatter(Tensor(self.x), self.src, self.dst, Tensor(w))
        np.testing.assert_allclose(out.data, dense @ self.x, atol=1e-12)

    def test_per_channel_weights_match_loop(self):
        w = self.rng.standard_normal((14, 3))
        expected = np.zeros_like(self.x)
        for e in range(14):
            expected[self.dst[e]] += w[e] * self.x[self.src[e]]
        out = ops.gather_scatter(Tensor(self.x), self.src, self.dst, Tensor(w))
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_out_of_range_index(self):
        with pytest.raises(BoundsError):
            ops.gather_scatter(Tensor(self.x), self.src + self.n, self.dst, Tensor(np.ones(14)))

    def test_negative_index(self):
        with pytest.raises(BoundsError):
            ops.gather_scatter(Tensor(self.x), -np.ones(14, dtype=int), self.dst, Tensor(np.ones(14)))

    def test_weight_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ops.gather_scatter(Tensor(self.x), self.src, self.dst, Tensor(np.ones((14, 2))))

    def test_gradients(self):
        x = Parameter(self.x)
        w = Parameter(self.rng.standard_normal((14, 3)))
        projection = Tensor(self.rng.standard_normal((self.n, 3)))
        for analytic, numeric in analytic_and_numeric(
            lambda: ops.mul(ops.gather_scatter(x, self.src, self.dst, w), projection), x, w
        ):
            assert np.max(relative_error(analytic, numeric)) < 1e-6

    def test_accumulation_is_deterministic(self):
        w = Tensor(self.rng.standard_normal(14))
        first = ops.gather_scatter(Tensor(self.x), self.src, self.dst, w).data
        second = ops.gather_scatter(Tensor(self.x), self.src, self.dst, w).data
        assert first.tobytes() == second.tobytes()


class TestFixedFanIn:
    """Destination-grouped edge lists summed by reshape."""

    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()
        self.rng = np.random.default_rng(5)
        self.n, self.k = 6, 3
        self.src = self.rng.integers(0, self.n, self.n * self.k)
        self.dst = np.repeat(np.arange(self.n), self.k)
        self.x = self.rng.standard_normal((self.n, 4))

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    @pytest.mark.parametrize("channels", [None, 4])
    def test_matches_scatter(self, channels):
        shape = (self.src.size,) if channels is None else (self.src.size, channels)
        w = Tensor(self.rng.standard_normal(shape))
        regular = ops.gather_scatter(Tensor(self.x), self.src, self.dst, w, fan_in=self.k)
        general = ops.gather_scatter(Tensor(self.x), self.src, self.dst, w)
        np.testing.assert_allclose(regular.data, general.data, atol=1e-12)

    def test_gradients(self):
        x = Parameter(self.x)
        w = Parameter(self.rng.standard_normal((self.src.size, 4)))
        weights = Tensor(self.rng.standard_normal((self.n, 4)))
        for analytic, numeric in analytic_and_numeric(
            lambda: ops.mul(ops.gather_scatter(x, self.src, self.dst, w, fan_in=self.k), weights), x, w
        ):
            assert np.max(relative_error(analytic, numeric)) < 1e-6

    def test_irregular_destinations(self):
        dst = self.dst.copy()
        dst[[0, -1]] = dst[[-1, 0]]
        with pytest.raises(StructuralError):
            ops.gather_scatter(Tensor(self.x), self.src, dst, Tensor(np.ones(self.src.size)), fan_in=self.k)

    def test_edge_count_must_match(self):
        with pytest.raises(StructuralError):
            ops.gather_scatter(Tensor(self.x), self.src, self.dst, Tensor(np.ones(self.src.size)), fan_in=4)


class TestClusterPool:
    def setup_method(self):
        self.scope = precision_scope("f64")
        self.scope.__enter__()

    def teardown_method(self):
        self.scope.__exit__(None, None, None)

    def test_mean_and_max(self):
        x = Tensor([[1.0], [3.0], [5.0], [7.0]])
        assignment = [0, 0, 1, 1]
        np.testing.assert_array_equal(ops.cluster_pool(x, assignment, 2, "mean").data, [[2.0], [6.0]])
        np.testing.assert_array_equal(ops.cluster_pool(x, assignment, 2, "max").data, [[3.0], [7.0]])

    def test_max_gradient_goes_to_lowest_tied_row(self):
        x = Parameter([[2.0], [2.0], [1.0]])
        with Tape() as tape:
            loss = ops.sum(ops.cluster_pool(x, [0, 0, 0], 1, "max"))
        tape.backward(loss)
        np.testing.assert_array_equal(x.grad, [[1.0], [0.0], [0.0]])

    def test_empty_cluster_raises(self):
        with pytest.raises(StructuralError):
            ops.cluster_pool(Tensor(np.ones((2, 1))), [0, 0], 2)


class TestOptimizers:
    """SGD, Adam and the multi-step schedule."""

    def test_sgd_step(self):
        """lr=0.1, p=1, g=1 gives p=0.9."""
        with precision_scope("f64"):
            p = Parameter([1.0])
            p.grad = np.array([1.0])
            SGD({"p": p}, lr=0.1).step()
            np.testing.assert_allclose(p.data, [0.9])

    def test_zero_gradient_leaves_sgd_parameters(self):
        state = OptimizerState(kind=OptimizerKind.SGD, lr=0.5)
        out = optimizer_step(state, {"p": np.array([2.0])}, {"p": np.array([0.0])})
        np.testing.assert_array_equal(out["p"], [2.0])

    def test_adam_barely_moves_on_zero_gradient(self):
        with precision_scope("f64"):
            p = Parameter([1.0, -1.0])
            p.grad = np.zeros(2)
            Adam({"p": p}, lr=0.01).step()
            assert np.max(np.abs(p.data - [1.0, -1.0])) < 0.01 * 1e-6

    def test_adam_first_step_moves_by_lr(self):
        """Bias correction makes the first step lr * sign(g)."""
        with precision_scope("f64"):
            p = Parameter([0.0])
            p.grad = np.array([3.0])
            Adam({"p": p}, lr=0.1).step()
            np.testing.assert_allclose(p.data, [-0.1], rtol=1e-6)

    def test_gradient_shape_mismatch(self):
        state = OptimizerState(kind=OptimizerKind.SGD, lr=0.1)
        with pytest.raises(DimensionError):
            optimizer_step(state, {"p": np.ones(2)}, {"p": np.ones(3)})

    def test_schedule_decays_at_milestones(self):
        """epochs=100, milestones (0.5, 0.75), lr 0.1: epoch 80 runs at 0.001."""
        schedule = MultiStepSchedule(0.1, 100, (0.5, 0.75), 0.1)
        assert schedule.lr_at(0) == pytest.approx(0.1)
        assert schedule.lr_at(49) == pytest.approx(0.1)
        assert schedule.lr_at(50) == pytest.approx(0.01)
        assert schedule.lr_at(80) == pytest.approx(0.001)

    def test_schedule_rejects_unordered_milestones(self):
        with pytest.raises(ParameterError):
            MultiStepSchedule(0.1, 10, (0.75, 0.5))
