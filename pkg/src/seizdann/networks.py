"""The three adversarial-training networks and the CNN-BiLSTM sequence model."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .exceptions import DataError
from .layers import (
    BatchNorm1d,
    BiLstm,
    Conv1d,
    GlobalAvgPool1d,
    LeakyReLU,
    Linear,
    MaxPool1d,
    Module,
)
from .tensor import Tensor

__all__ = [
    "ConvBlock",
    "FeatureExtractor",
    "LabelPredictor",
    "DomainClassifier",
    "SequenceModel",
    "IN_CHANNELS",
    "WINDOW_LEN",
    "FEATURE_DIM",
    "CONV_CHANNELS",
]

IN_CHANNELS = 18
WINDOW_LEN = 500
FEATURE_DIM = 40
CONV_CHANNELS = (5, 10, 20, 40)
NEGATIVE_SLOPE = 0.1


class ConvBlock(Module):
    """Two conv->batchnorm->leaky-relu stages followed by a halving maxpool."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv1d(in_channels, out_channels, rng)
        self.bn1 = BatchNorm1d(out_channels)
        self.conv2 = Conv1d(out_channels, out_channels, rng)
        self.bn2 = BatchNorm1d(out_channels)
        self.act = LeakyReLU(NEGATIVE_SLOPE)
        self.pool = MaxPool1d(2, 2)

    def forward(self, x: Tensor) -> Tensor:
        x = self.act(self.bn1(self.conv1(x)))
        x = self.act(self.bn2(self.conv2(x)))
        return self.pool(x)


class FeatureExtractor(Module):
    """Four conv blocks plus global average pooling: (N, 18, 500) -> (N, 40)."""

    def __init__(self, rng: np.random.Generator):
        super().__init__()
        blocks = []
        prev = IN_CHANNELS
        for ch in CONV_CHANNELS:
            blocks.append(ConvBlock(prev, ch, rng))
            prev = ch
        self.blocks = blocks
        self.gap = GlobalAvgPool1d()

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 3 or x.data.shape[1] != IN_CHANNELS:
            raise DataError(
                f"feature extractor expects (N, {IN_CHANNELS}, L) input, got {x.data.shape}"
            )
        for block in self.blocks:
            x = block(x)
        return self.gap(x)


class LabelPredictor(Module):
    """Two affine layers 40 -> 20 -> 1, no hidden activation, sigmoid output.

    Returns per-window seizure probabilities of shape (N,).
    """

    def __init__(self, rng: np.random.Generator):
        super().__init__()
        self.fc1 = Linear(FEATURE_DIM, 20, rng)
        self.fc2 = Linear(20, 1, rng)

    def forward(self, feats: Tensor) -> Tensor:
        out = self.fc2(self.fc1(feats))
        return out.reshape(out.data.shape[0]).sigmoid()


class DomainClassifier(Module):
    """Three affine layers 40 -> 40 -> 40 -> K with softmax over K domains.

    The hidden layers keep the feature dimensionality and are followed by
    batch norm and leaky relu; the gradient reversal sits outside this
    module so its forward is a plain classifier.
    """

    def __init__(self, n_domains: int, rng: np.random.Generator):
        super().__init__()
        if n_domains < 2:
            raise DataError(f"domain classifier needs K >= 2 domains, got {n_domains}")
        self.n_domains = n_domains
        self.fc1 = Linear(FEATURE_DIM, FEATURE_DIM, rng)
        self.bn1 = BatchNorm1d(FEATURE_DIM)
        self.fc2 = Linear(FEATURE_DIM, FEATURE_DIM, rng)
        self.bn2 = BatchNorm1d(FEATURE_DIM)
        self.fc3 = Linear(FEATURE_DIM, n_domains, rng)
        self.act = LeakyReLU(NEGATIVE_SLOPE)

    def forward(self, feats: Tensor) -> Tensor:
        x = self.act(self.bn1(self.fc1(feats)))
        x = self.act(self.bn2(self.fc2(x)))
        return self.fc3(x).softmax(axis=1)


class SequenceModel(Module):
    """CNN feature extractor + 2-layer BiLSTM + affine 40 -> 1 with sigmoid.

    forward_features runs the CNN over a stack of windows (one batch-norm
    batch); forward_sequence runs the recurrent head over one patient's
    feature sequence. forward chains both for a single sequence.
    """

    def __init__(self, rng: np.random.Generator, features: FeatureExtractor | None = None):
        super().__init__()
        self.features = features if features is not None else FeatureExtractor(rng)
        self.bilstm = BiLstm(FEATURE_DIM, 20, 2, rng)
        self.out = Linear(self.bilstm.output_size, 1, rng)

    def forward_features(self, windows: Tensor) -> Tensor:
        return self.features(windows)

    def forward_sequence(self, feats: Tensor) -> Tensor:
        if feats.data.shape[0] < 1:
            raise DataError("sequence model requires at least one window")
        h = self.bilstm(feats)
        out = self.out(h)
        return out.reshape(out.data.shape[0]).sigmoid()

    def forward(self, windows: Tensor) -> Tensor:
        return self.forward_sequence(self.forward_features(windows))


def _expected_feature_param_count() -> int:
    total = 0
    prev = IN_CHANNELS
    for ch in CONV_CHANNELS:
        # conv weights + biases, batch norm gamma + beta, twice per block
        total += (ch * prev * 3 + ch) + 2 * ch
        total += (ch * ch * 3 + ch) + 2 * ch
        prev = ch
    return total


def assert_architecture(model: FeatureExtractor) -> None:
    """Guard the fixed conv channel plan 18->5->5->10->10->20->20->40->40."""
    got = sum(p.size for p in model.parameters())
    want = _expected_feature_param_count()
    if got != want:
        raise AssertionError(f"feature extractor has {got} parameters, expected {want}")
    plan = []
    for block in model.blocks:
        plan.append(block.conv1.weight.data.shape[:2])
        plan.append(block.conv2.weight.data.shape[:2])
    expected = [(5, 18), (5, 5), (10, 5), (10, 10), (20, 10), (20, 20), (40, 20), (40, 40)]
    if [tuple(p) for p in plan] != expected:
        raise AssertionError(f"conv channel plan mismatch: {plan}")


def predict_window_probabilities(
    features: FeatureExtractor,
    label_head: LabelPredictor,
    windows: np.ndarray,
    batch_size: int = 128,
) -> np.ndarray:
    """Eval-mode per-window probabilities for (T, 18, 500) window stacks."""
    features.eval()
    label_head.eval()
    chunks = []
    with T.no_grad():
        for lo in range(0, windows.shape[0], batch_size):
            x = Tensor(np.asarray(windows[lo : lo + batch_size], dtype=np.float64))
            chunks.append(label_head(features(x)).data)
    return np.concatenate(chunks) if chunks else np.zeros(0)


def predict_sequence_probabilities(
    model: SequenceModel, windows: np.ndarray, batch_size: int = 128
) -> np.ndarray:
    """Eval-mode probabilities for one patient's (T, 18, 500) sequence."""
    model.eval()
    with T.no_grad():
        feats = []
        for lo in range(0, windows.shape[0], batch_size):
            x = Tensor(np.asarray(windows[lo : lo + batch_size], dtype=np.float64))
            feats.append(model.forward_features(x).data)
        seq = Tensor(np.concatenate(feats))
        return model.forward_sequence(seq).data
