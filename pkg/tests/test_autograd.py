"""Tests for the reverse-mode autograd engine."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.autograd import Tensor, functional as F, no_grad, parameter
from dml_captioning.src.autograd.gradcheck import check_gradients
from dml_captioning.src.autograd.serialization import pack_tensors, unpack_tensors
from dml_captioning.src.errors import GraphError, NumericError, ShapeError

TOLERANCE = 1e-6


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return F.sum(F.mul(out, Tensor(weights)))


class TestForwardValues:
    """Test forward results of individual operations."""

    def test_matmul_example(self):
        """A 1x2 by 2x1 product gives the dot product."""
        a = Tensor([[1.0, 2.0]])
        b = Tensor([[3.0], [4.0]])
        assert F.matmul(a, b).numpy().tolist() == [[11.0]]

    def test_softmax_sums_to_one(self):
        """Softmax rows sum to one and respect masks."""
        x = Tensor([[1.0, 2.0, 3.0], [0.5, 0.5, 0.5]])
        y = F.softmax(x).numpy()
        np.testing.assert_allclose(y.sum(axis=1), [1.0, 1.0])
        mask = np.array([[True, False, True], [True, True, True]])
        ym = F.softmax(x, mask=mask).numpy()
        assert ym[0, 1] == 0.0
        np.testing.assert_allclose(ym[1], [1 / 3] * 3)

    def test_softmax_fully_masked_row_raises(self):
        """A row with every entry masked is a numeric error."""
        x = Tensor([[1.0, 2.0]])
        with pytest.raises(NumericError):
            F.softmax(x, mask=np.array([[False, False]]))

    def test_layer_norm_normalizes(self):
        """Layer norm output has zero mean and unit variance per row."""
        x = Tensor(np.random.default_rng(0).normal(size=(3, 6)))
        y = F.layer_norm(x, Tensor(np.ones(6)), Tensor(np.zeros(6))).numpy()
        np.testing.assert_allclose(y.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(y.var(axis=1), 1.0, atol=1e-3)

    def test_gelu_values(self):
        """GELU is zero at zero and close to identity for large inputs."""
        y = F.gelu(Tensor([0.0, 10.0, -10.0])).numpy()
        assert y[0] == 0.0
        assert abs(y[1] - 10.0) < 1e-12
        assert abs(y[2]) < 1e-12

    def test_cross_entropy_without_smoothing(self):
        """Unsmoothed cross-entropy equals the mean negative log-likelihood."""
        logits = np.array([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        targets = [0, 1]
        loss = F.cross_entropy_smoothed(Tensor(logits), targets).item()
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        assert loss == pytest.approx(-(logp[0, 0] + logp[1, 1]) / 2)

    def test_cross_entropy_ignores_positions(self):
        """Ignored positions do not contribute to the mean."""
        logits = Tensor(np.array([[2.0, 0.0], [0.0, 5.0]]))
        full = F.cross_entropy_smoothed(Tensor(logits.data[:1]), [0]).item()
        masked = F.cross_entropy_smoothed(logits, [0, 9], ignore_id=9).item()
        assert masked == pytest.approx(full)

    def test_cross_entropy_all_ignored_raises(self):
        """A batch where every position is ignored is rejected."""
        with pytest.raises(NumericError):
            F.cross_entropy_smoothed(Tensor(np.zeros((2, 3))), [1, 1], ignore_id=1)

    def test_non_finite_logits_raise(self):
        """NaN reaching cross-entropy is reported as a numeric error."""
        with pytest.raises(NumericError):
            F.cross_entropy_smoothed(Tensor([[np.nan, 0.0]]), [0])

    def test_shape_mismatch_raises(self):
        """Incompatible operands raise a shape error."""
        with pytest.raises(ShapeError):
            F.add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))))
        with pytest.raises(ShapeError):
            F.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


class TestBackward:
    """Test gradient propagation semantics."""

    def test_simple_gradient(self):
        """d(sum(x*x))/dx = 2x."""
        x = parameter([1.0, -2.0, 3.0])
        F.sum(F.mul(x, x)).backward()
        np.testing.assert_allclose(x.grad, [2.0, -4.0, 6.0])

    def test_detach_blocks_gradient(self):
        """A detached path contributes nothing to the gradient."""
        x = parameter([2.0])
        loss = F.sum(F.mul(x, F.detach(x)))
        loss.backward()
        np.testing.assert_allclose(x.grad, [2.0])

    def test_straight_through_routes_to_first_argument(self):
        """Straight-through forwards q and sends its gradient to e only."""
        e = parameter([1.0, 2.0])
        q = parameter([5.0, 7.0])
        out = F.straight_through(e, q)
        np.testing.assert_array_equal(out.numpy(), [5.0, 7.0])
        F.sum(F.mul(out, Tensor([3.0, 4.0]))).backward()
        np.testing.assert_allclose(e.grad, [3.0, 4.0])
        assert q.grad is None

    def test_backward_twice_raises(self):
        """A graph can only be consumed once."""
        x = parameter([1.0, 2.0])
        loss = F.sum(F.mul(x, x))
        loss.backward()
        with pytest.raises(GraphError):
            loss.backward()

    def test_non_scalar_backward_raises(self):
        """Only scalar losses can start a backward pass."""
        x = parameter([1.0, 2.0])
        with pytest.raises(GraphError):
            F.mul(x, 2.0).backward()

    def test_leaf_gradients_accumulate(self):
        """Two backward passes over fresh graphs add into the same leaf."""
        x = parameter([1.0])
        F.sum(F.mul(x, 3.0)).backward()
        F.sum(F.mul(x, 4.0)).backward()
        np.testing.assert_allclose(x.grad, [7.0])

    def test_no_grad_records_nothing(self):
        """Results computed under no_grad do not require gradients."""
        x = parameter([1.0])
        with no_grad():
            y = F.mul(x, 2.0)
        assert not y.requires_grad
        assert y.creator is None

    def test_backward_is_deterministic(self):
        """Identical graphs produce bit-identical gradients."""
        rng = np.random.default_rng(3)
        data = rng.normal(size=(4, 5))
        w = rng.normal(size=(5, 3))
        grads = []
        for _ in range(2):
            x = parameter(data.copy())
            wt = parameter(w.copy())
            loss = F.sum(F.softmax(F.matmul(x, wt)))
            loss = F.add(loss, F.sum(F.gelu(F.matmul(x, wt))))
            loss.backward()
            grads.append((x.grad.copy(), wt.grad.copy()))
        np.testing.assert_array_equal(grads[0][0], grads[1][0])
        np.testing.assert_array_equal(grads[0][1], grads[1][1])


class TestGradcheck:
    """Test analytic gradients against central differences."""

    @pytest.mark.parametrize("trial", range(100))
    def test_elementwise_and_matmul(self, trial):
        """add, sub, mul, matmul and transpose."""
        rng = np.random.default_rng(trial)
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(3, 4)))
        c = parameter(rng.normal(size=(3, 2)))
        bias = parameter(rng.normal(size=(4,)))
        w = rng.normal(size=(4, 2))

        def loss():
            x = F.add(F.mul(F.sub(a, b), a), bias)
            return _weighted(F.matmul(F.transpose(x), c), w)

        assert check_gradients(loss, [a, b, c, bias]).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(100))
    def test_softmax_and_log_softmax(self, trial):
        """Masked softmax and log-softmax."""
        rng = np.random.default_rng(100 + trial)
        x = parameter(rng.normal(size=(3, 5)))
        mask = np.tril(np.ones((3, 5), dtype=bool))
        w1, w2 = rng.normal(size=(3, 5)), rng.normal(size=(3, 5))

        def loss():
            return F.add(_weighted(F.softmax(x, mask=mask), w1), _weighted(F.log_softmax(x), w2))

        assert check_gradients(loss, [x]).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(100))
    def test_layer_norm_and_gelu(self, trial):
        """Layer norm with gain and bias, followed by GELU."""
        rng = np.random.default_rng(200 + trial)
        x = parameter(rng.normal(size=(2, 6)))
        gain = parameter(rng.normal(size=(6,)))
        bias = parameter(rng.normal(size=(6,)))
        w = rng.normal(size=(2, 6))

        def loss():
            return _weighted(F.gelu(F.layer_norm(x, gain, bias)), w)

        assert check_gradients(loss, [x, gain, bias]).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(100))
    def test_gather_slice_and_concat(self, trial):
        """take, row, columns, rows, concat, stack and reshape."""
        rng = np.random.default_rng(300 + trial)
        table = parameter(rng.normal(size=(5, 4)))
        ids = rng.integers(0, 5, size=6)
        w = rng.normal(size=(2, 16))

        def loss():
            g = F.take(table, ids)
            parts = F.concat([F.columns(g, 0, 2), F.columns(g, 2, 4)], axis=0)
            top = F.rows(parts, 0, 4)
            stacked = F.reshape(F.stack([F.row(top, 0), F.row(top, 3)]), (1, 4))
            return F.add(_weighted(stacked, w[:1, :4]), _weighted(F.row(table, 1), w[1, :4]))

        assert check_gradients(loss, [table]).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(100))
    def test_cross_entropy_smoothed(self, trial):
        """Label-smoothed cross-entropy with an ignored position."""
        rng = np.random.default_rng(400 + trial)
        logits = parameter(rng.normal(size=(4, 6)))
        targets = rng.integers(0, 5, size=4)
        targets[2] = 5

        def loss():
            return F.cross_entropy_smoothed(logits, targets, smoothing=0.1, ignore_id=5)

        assert check_gradients(loss, [logits]).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(100))
    def test_mean_and_axis_sum(self, trial):
        """Axis sums and means."""
        rng = np.random.default_rng(500 + trial)
        x = parameter(rng.normal(size=(3, 4)))
        w = rng.normal(size=(4,))

        def loss():
            return F.add(_weighted(F.sum(x, axis=0), w), F.mean(F.mul(x, x)))

        assert check_gradients(loss, [x]).passed(TOLERANCE)

    def test_small_scaled_gradient_is_rejected(self):
        """A gradient half the true value fails even when it is far below one."""
        x = parameter(np.random.default_rng(600).normal(size=(2, 3)))
        w = np.full((2, 3), 2e-4)

        def loss():
            # detach hides half of the dependence from backward
            return F.add(_weighted(x, w), _weighted(F.detach(x), w))

        report = check_gradients(loss, [x])
        assert report.checked == 6
        assert report.max_rel_error == pytest.approx(0.5, rel=1e-6)
        assert not report.passed(1e-3)
        assert check_gradients(loss, [x], per_tensor=True).max_rel_error == pytest.approx(0.5, rel=1e-6)

    def test_unused_entries_are_skipped(self):
        """Entries with zero analytic gradient are counted as skipped."""
        x = parameter(np.random.default_rng(601).normal(size=(2, 3)))
        w = np.array([1.5, -0.5, 2.0])

        def loss():
            return _weighted(F.row(x, 0), w)

        report = check_gradients(loss, [x])
        assert (report.checked, report.skipped) == (3, 3)
        assert report.passed(TOLERANCE)
        assert check_gradients(loss, [x], per_tensor=True).passed(TOLERANCE)


class TestSerialization:
    """Test tensor packing."""

    def test_pack_unpack_preserves_bits(self):
        """Packed arrays come back bit-identical and in the same order."""
        rng = np.random.default_rng(0)
        arrays = {"b": rng.normal(size=(2, 3)), "a": rng.normal(size=(4,))}
        blob, index = pack_tensors(arrays)
        restored = unpack_tensors(blob, index)
        assert sorted(restored) == sorted(arrays)
        for name, array in arrays.items():
            np.testing.assert_array_equal(restored[name], array)


if __name__ == "__main__":
    pytest.main([__file__])
