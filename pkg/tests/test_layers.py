"""Layer forward semantics: convolutions, pooling, batchnorm, LSTM."""

import numpy as np
import pytest

from seizdann import tensor as T
from seizdann.exceptions import DataError, WeightsFormatError
from seizdann.layers import (
    BatchNorm1d,
    BiLstm,
    Conv1d,
    GlobalAvgPool1d,
    LeakyReLU,
    Linear,
    Lstm,
    MaxPool1d,
    uniform_init,
)
from seizdann.tensor import Tensor


def rng():
    return np.random.default_rng(0)


# --- conv --------------------------------------------------------------

def test_conv_identity_kernel():
    conv = Conv1d(1, 1, rng())
    conv.weight.data[:] = np.array([[[0.0, 1.0, 0.0]]])
    conv.bias.data[:] = 0.0
    out = conv(Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]])))
    np.testing.assert_allclose(out.data, [[[1.0, 2.0, 3.0, 4.0]]])


def test_conv_box_kernel():
    conv = Conv1d(1, 1, rng())
    conv.weight.data[:] = 1.0
    conv.bias.data[:] = 0.0
    out = conv(Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]])))
    np.testing.assert_allclose(out.data, [[[3.0, 6.0, 9.0, 7.0]]])


def test_conv_zero_weights_gives_bias():
    conv = Conv1d(2, 3, rng())
    conv.weight.data[:] = 0.0
    conv.bias.data[:] = np.array([1.0, -2.0, 0.5])
    out = conv(Tensor(np.ones((1, 2, 5))))
    for c, b in enumerate((1.0, -2.0, 0.5)):
        np.testing.assert_allclose(out.data[0, c], b)


def test_conv_preserves_length():
    conv = Conv1d(18, 5, rng())
    out = conv(Tensor(np.zeros((2, 18, 500))))
    assert out.shape == (2, 5, 500)


# --- pooling -------------------------------------------------------------

def test_maxpool_basic():
    out = MaxPool1d()(Tensor(np.array([[[1.0, 3.0, 2.0, 5.0]]])))
    np.testing.assert_array_equal(out.data, [[[3.0, 5.0]]])


def test_maxpool_odd_length_drops_trailing():
    out = MaxPool1d()(Tensor(np.zeros((1, 1, 125))))
    assert out.shape == (1, 1, 62)


def test_global_avg_pool():
    x = Tensor(np.array([[[1.0, 1.0, 1.0], [2.0, 4.0, 6.0]]]))
    out = GlobalAvgPool1d()(x)
    np.testing.assert_allclose(out.data, [[1.0, 4.0]])


# --- batchnorm -----------------------------------------------------------

def test_batchnorm_train_normalizes():
    bn = BatchNorm1d(3)
    bn.train()
    x = Tensor(np.random.default_rng(1).normal(2.0, 3.0, size=(8, 3, 10)))
    out = bn(x).data
    np.testing.assert_allclose(out.mean(axis=(0, 2)), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.std(axis=(0, 2)), 1.0, atol=1e-3)


def test_batchnorm_constant_channel_outputs_beta():
    bn = BatchNorm1d(1)
    bn.beta.data[:] = 0.7
    bn.train()
    out = bn(Tensor(np.full((4, 1, 6), 3.0)))
    np.testing.assert_allclose(out.data, 0.7, atol=1e-6)


def test_batchnorm_eval_formula():
    bn = BatchNorm1d(2)
    bn.running_mean[:] = np.array([1.0, -1.0])
    bn.running_var[:] = np.array([4.0, 9.0])
    bn.gamma.data[:] = 2.0
    bn.beta.data[:] = 1.0
    bn.eval()
    x = np.random.default_rng(2).normal(size=(3, 2, 5))
    out = bn(Tensor(x)).data
    expected = 2.0 * (x - np.array([1.0, -1.0]).reshape(1, 2, 1)) / np.sqrt(
        np.array([4.0, 9.0]).reshape(1, 2, 1) + 1e-5) + 1.0
    np.testing.assert_allclose(out, expected, atol=1e-9)


def test_batchnorm_eval_batch_size_independent():
    bn = BatchNorm1d(4)
    bn.train()
    bn(Tensor(np.random.default_rng(3).normal(size=(8, 4, 6))))
    bn.eval()
    x8 = np.random.default_rng(4).normal(size=(8, 4, 6))
    out8 = bn(Tensor(x8)).data
    out1 = np.concatenate([bn(Tensor(x8[i:i + 1])).data for i in range(8)])
    np.testing.assert_allclose(out8, out1, atol=1e-12)


def test_batchnorm_train_needs_two_samples():
    bn = BatchNorm1d(2)
    bn.train()
    with pytest.raises(DataError):
        bn(Tensor(np.ones((1, 2))))


def test_batchnorm_2d_input():
    bn = BatchNorm1d(3)
    bn.train()
    out = bn(Tensor(np.random.default_rng(5).normal(size=(16, 3))))
    np.testing.assert_allclose(out.data.mean(axis=0), 0.0, atol=1e-9)


# --- activations ----------------------------------------------------------

def test_leaky_relu_slope():
    out = LeakyReLU(0.1)(Tensor(np.array([-1.0, 2.0])))
    np.testing.assert_allclose(out.data, [-0.1, 2.0])


# --- lstm ------------------------------------------------------------------

def test_lstm_zero_weights_zero_output():
    lstm = Lstm(4, 3, rng())
    for p in lstm.parameters():
        p.data[:] = 0.0
    out = lstm(Tensor(np.random.default_rng(6).normal(size=(5, 4))))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-12)


def test_lstm_backward_direction_is_reversed_forward():
    lstm = Lstm(4, 3, rng())
    x = np.random.default_rng(7).normal(size=(6, 4))
    fwd = lstm(Tensor(x)).data
    rev = lstm(Tensor(x[::-1].copy())).data[::-1]
    # running the same cell on the reversed sequence then flipping equals
    # a backward pass over the original
    np.testing.assert_allclose(rev[::-1], lstm(Tensor(x[::-1].copy())).data)
    assert fwd.shape == rev.shape == (6, 3)


def test_bilstm_output_shape_and_layers():
    bi = BiLstm(40, 20, 2, rng())
    for t_len in (1, 7):
        out = bi(Tensor(np.random.default_rng(8).normal(size=(t_len, 40))))
        assert out.shape == (t_len, 40)


def test_bilstm_zero_weights_zero_output():
    bi = BiLstm(5, 4, 2, rng())
    for p in bi.parameters():
        p.data[:] = 0.0
    out = bi(Tensor(np.ones((3, 5))))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-12)


# --- module plumbing --------------------------------------------------------

def test_uniform_init_bounds():
    w = uniform_init(rng(), (50, 50), fan_in=25)
    assert np.all(np.abs(w) <= 0.2 + 1e-12)


def test_state_roundtrip():
    lin = Linear(3, 2, rng())
    state = {k: v.copy() for k, v in lin.state_arrays().items()}
    lin.weight.data[:] = 0.0
    lin.load_state_arrays(state)
    np.testing.assert_array_equal(lin.weight.data, state["weight"])


def test_load_state_rejects_shape_mismatch():
    lin = Linear(3, 2, rng())
    state = lin.state_arrays()
    state["weight"] = np.zeros((2, 2))
    with pytest.raises(WeightsFormatError):
        lin.load_state_arrays(state)


def test_load_state_rejects_unknown_key():
    lin = Linear(3, 2, rng())
    state = dict(lin.state_arrays())
    state["mystery"] = np.zeros(1)
    with pytest.raises(WeightsFormatError):
        lin.load_state_arrays(state)


def test_train_eval_toggle_recurses():
    bi = BiLstm(4, 3, 2, rng())
    bi.eval()
    assert all(not m.training for m in bi.modules())
    bi.train()
    assert all(m.training for m in bi.modules())
