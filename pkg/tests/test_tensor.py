"""Engine-level behavior: arithmetic, broadcasting, backward, no_grad."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizdann import tensor as T
from seizdann.tensor import Tensor


def test_sum_backward_is_ones():
    x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))


def test_dot_backward():
    x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, [2.0, 4.0, 6.0])


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_grad_accumulates_across_backwards():
    x = Tensor(np.array([2.0]), requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_allclose(x.grad, [6.0])


def test_zero_grad_clears():
    x = Tensor(np.array([2.0]), requires_grad=True)
    (x * x).sum().backward()
    x.zero_grad()
    assert x.grad is None


def test_no_grad_blocks_recording():
    x = Tensor(np.ones(4), requires_grad=True)
    with T.no_grad():
        y = (x * 2.0).sum()
    assert y.requires_grad is False


def test_detach_cuts_graph():
    x = Tensor(np.ones(4), requires_grad=True)
    y = (x * 2.0).detach()
    assert y.requires_grad is False
    np.testing.assert_array_equal(y.data, x.data * 2.0)


def test_broadcast_add_unbroadcasts_grad():
    x = Tensor(np.ones((3, 4)), requires_grad=True)
    b = Tensor(np.ones(4), requires_grad=True)
    (x + b).sum().backward()
    assert x.grad.shape == (3, 4)
    assert b.grad.shape == (4,)
    np.testing.assert_array_equal(b.grad, 3.0 * np.ones(4))


def test_matmul_shapes_and_grads():
    a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    b = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
    out = a @ b
    assert out.shape == (2, 4)
    out.sum().backward()
    np.testing.assert_allclose(a.grad, np.ones((2, 4)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((2, 4)))


def test_getitem_scatter_backward():
    x = Tensor(np.arange(10.0), requires_grad=True)
    x[2:5].sum().backward()
    expected = np.zeros(10)
    expected[2:5] = 1.0
    np.testing.assert_array_equal(x.grad, expected)


def test_getitem_advanced_indexing_backward():
    x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
    rows = np.array([0, 1, 2])
    cols = np.array([1, 3, 0])
    x[rows, cols].sum().backward()
    expected = np.zeros((3, 4))
    expected[rows, cols] = 1.0
    np.testing.assert_array_equal(x.grad, expected)


def test_softmax_rows_sum_to_one():
    x = Tensor(np.random.default_rng(0).normal(size=(5, 7)))
    out = x.softmax(axis=1)
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(5), atol=1e-12)


def test_sigmoid_range_and_grad():
    x = Tensor(np.array([-30.0, 0.0, 30.0]), requires_grad=True)
    y = x.sigmoid()
    assert np.all(y.data > 0.0) and np.all(y.data < 1.0)
    y.sum().backward()
    assert np.all(np.isfinite(x.grad))


def test_concat_backward_splits():
    a = Tensor(np.ones((2, 3)), requires_grad=True)
    b = Tensor(np.ones((2, 2)), requires_grad=True)
    out = T.concat([a, b], axis=1)
    assert out.shape == (2, 5)
    (out * 2.0).sum().backward()
    np.testing.assert_array_equal(a.grad, 2.0 * np.ones((2, 3)))
    np.testing.assert_array_equal(b.grad, 2.0 * np.ones((2, 2)))


def test_maxpool_ties_pick_earliest():
    x = Tensor(np.array([[[1.0, 1.0, 0.5, 0.2]]]), requires_grad=True)
    out = T.maxpool1d(x, kernel=2, stride=2)
    out.sum().backward()
    np.testing.assert_array_equal(x.grad[0, 0], [1.0, 0.0, 1.0, 0.0])


def test_grad_reverse_forward_identity_backward_negates():
    x = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    y = T.grad_reverse(x, 0.5)
    np.testing.assert_array_equal(y.data, x.data)
    y.sum().backward()
    np.testing.assert_allclose(x.grad, [-0.5, -0.5])


def test_grad_reverse_lambda_zero_blocks_gradient():
    x = Tensor(np.array([3.0]), requires_grad=True)
    T.grad_reverse(x, 0.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [0.0])


def test_backward_deterministic():
    rng = np.random.default_rng(7)
    vals = rng.normal(size=(4, 4))
    grads = []
    for _ in range(2):
        x = Tensor(vals.copy(), requires_grad=True)
        y = ((x @ x).tanh() * 0.5).sum()
        y.backward()
        grads.append(x.grad.copy())
    np.testing.assert_array_equal(grads[0], grads[1])


def test_conv1d_matches_manual_correlation():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(1, 2, 6)))
    w = Tensor(rng.normal(size=(3, 2, 3)))
    out = T.conv1d(x, w, stride=1, padding=1)
    assert out.shape == (1, 3, 6)
    padded = np.pad(x.data, ((0, 0), (0, 0), (1, 1)))
    expected = np.empty((1, 3, 6))
    for o in range(3):
        for p in range(6):
            expected[0, o, p] = (padded[0, :, p:p + 3] * w.data[o]).sum()
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=8),
    st.lists(st.floats(-5, 5), min_size=1, max_size=8),
)
def test_add_commutes(a, b):
    n = min(len(a), len(b))
    x = Tensor(np.array(a[:n]))
    y = Tensor(np.array(b[:n]))
    np.testing.assert_array_equal((x + y).data, (y + x).data)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=16))
def test_mean_matches_numpy(vals):
    x = Tensor(np.array(vals))
    assert x.mean().item() == pytest.approx(np.mean(vals), rel=1e-12, abs=1e-12)


def test_values_finite_after_forward_backward():
    rng = np.random.default_rng(11)
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    y = (x.sigmoid().log() * -1.0).mean()
    y.backward()
    assert np.all(np.isfinite(y.data))
    assert np.all(np.isfinite(x.grad))
