"""Losses, class weights, the adversarial schedule, and both training stages."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seizdann import tensor as T
from seizdann.data import WindowedSequence
from seizdann.exceptions import SingleClassError, SingleDomainError
from seizdann.layers import Linear
from seizdann.networks import (
    DomainClassifier,
    FeatureExtractor,
    LabelPredictor,
)
from seizdann.tensor import Tensor
from seizdann.training import (
    ClassWeights,
    SourceDataset,
    Stage1Config,
    Stage1Result,
    Stage2Config,
    class_weights,
    domain_loss,
    domain_probe_accuracy,
    label_loss,
    lambda_schedule,
    sequence_label_loss,
    stage1_train,
    stage2_train,
)

LN2 = 0.6931471805599453


# ------------------------------------------------------------ class weights

def test_class_weights_ten_samples_two_positive():
    y = np.array([1, 1, 0, 0, 0, 0, 0, 0, 0, 0])
    w = class_weights(y)
    assert abs(w.w1 - 2.5) < 1e-9
    assert abs(w.w0 - 0.625) < 1e-9


def test_class_weights_balanced_labels_are_unit():
    w = class_weights(np.array([0, 1, 0, 1]))
    assert w.w0 == w.w1 == 1.0


def test_class_weights_single_class_rejected():
    with pytest.raises(SingleClassError):
        class_weights(np.ones(5, dtype=np.int64))


@given(
    n_pos=st.integers(min_value=1, max_value=200),
    n_neg=st.integers(min_value=1, max_value=200),
)
def test_class_weight_identity(n_pos, n_neg):
    y = np.concatenate([np.ones(n_pos, np.int64), np.zeros(n_neg, np.int64)])
    w = class_weights(y)
    half = (n_pos + n_neg) / 2.0
    assert abs(w.w1 * n_pos - half) < 1e-9
    assert abs(w.w0 * n_neg - half) < 1e-9


# ------------------------------------------------------------------ losses

def test_label_loss_perfect_predictions_vanish():
    y = np.array([0, 1, 1, 0])
    probs = Tensor(y.astype(np.float64))
    loss = label_loss(probs, y, ClassWeights(3.0, 7.0))
    assert loss.item() < 1e-6


def test_label_loss_coin_flip_is_ln2():
    y = np.array([0, 1, 0, 1, 1])
    probs = Tensor(np.full(5, 0.5))
    loss = label_loss(probs, y, ClassWeights(1.0, 1.0))
    assert abs(loss.item() - LN2) < 1e-9


def test_label_loss_single_weighted_sample():
    loss = label_loss(Tensor(np.array([0.9])), np.array([1]), ClassWeights(1.0, 2.0))
    assert abs(loss.item() - (-2.0 * math.log(0.9))) < 1e-9


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_unit_weights_reduce_to_plain_bce(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=12)
    p = rng.uniform(0.01, 0.99, size=12)
    got = label_loss(Tensor(p), y, ClassWeights(1.0, 1.0)).item()
    plain = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert abs(got - plain) < 1e-12


def test_domain_loss_uniform_is_ln_k():
    probs = Tensor(np.full((3, 4), 0.25))
    loss = domain_loss(probs, np.array([0, 2, 3]))
    assert abs(loss.item() - math.log(4.0)) < 1e-9


def test_domain_loss_one_hot_correct_vanishes():
    probs = Tensor(np.eye(3)[[0, 1, 2]])
    assert domain_loss(probs, np.array([0, 1, 2])).item() < 1e-6


def test_domain_loss_one_hot_wrong_hits_clamp():
    probs = Tensor(np.eye(2)[[0]])
    loss = domain_loss(probs, np.array([1]))
    assert abs(loss.item() - (-math.log(1e-7))) < 1e-6


def test_sequence_loss_normalizer_is_total_window_count():
    rng = np.random.default_rng(0)
    p1, p2 = rng.uniform(0.05, 0.95, 10), rng.uniform(0.05, 0.95, 30)
    y1 = rng.integers(0, 2, 10)
    y2 = rng.integers(0, 2, 30)
    w = ClassWeights(0.75, 1.5)
    got = sequence_label_loss([Tensor(p1), Tensor(p2)], [y1, y2], w).item()

    def weighted_sum(p, y):
        ws = np.where(y == 1, w.w1, w.w0)
        return np.sum(ws * (y * np.log(p) + (1 - y) * np.log(1 - p)))

    want = -(weighted_sum(p1, y1) + weighted_sum(p2, y2)) / 40.0
    assert abs(got - want) < 1e-12


# ---------------------------------------------------------------- schedule

def test_lambda_schedule_closed_form_points():
    assert lambda_schedule(0.0) == 0.0
    assert abs(lambda_schedule(0.5) - 0.9866143) < 1e-6
    assert abs(lambda_schedule(1.0) - 0.9999092) < 1e-6


def test_lambda_schedule_rejects_out_of_range():
    with pytest.raises(ValueError):
        lambda_schedule(-0.01)
    with pytest.raises(ValueError):
        lambda_schedule(1.01)


@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
)
def test_lambda_schedule_monotone(p1, p2):
    lo, hi = sorted((p1, p2))
    assert lambda_schedule(lo) <= lambda_schedule(hi)


# --------------------------------------------------- gradient reversal math

class _TinyStage1:
    """Linear stand-ins for the three networks, small enough to audit."""

    def __init__(self, seed):
        r1, r2, r3 = (
            np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
        )
        self.f = Linear(4, 3, r1)
        self.y = Linear(3, 1, r2)
        self.d = Linear(3, 2, r3)

    def params(self):
        return self.f.parameters() + self.y.parameters() + self.d.parameters()


def test_grl_update_matches_manual_two_pass_gradients():
    lam = 0.8
    rng = np.random.default_rng(5)
    x = rng.standard_normal((8, 4))
    y = rng.integers(0, 2, 8)
    d = rng.integers(0, 2, 8)
    w = ClassWeights(1.0, 1.0)

    # Single backward through the reversal layer.
    a = _TinyStage1(0)
    feats = a.f(Tensor(x))
    ly = label_loss(a.y(feats).reshape(8).sigmoid(), y, w)
    ld = domain_loss(a.d(T.grad_reverse(feats, lam)).softmax(axis=1), d)
    (ly + ld).backward()

    # Manual composition: dL_y everywhere, dL_d on the domain head, and
    # -lam * dL_d/dtheta_f added to the feature gradients.
    b = _TinyStage1(0)
    feats_b = b.f(Tensor(x))
    label_loss(b.y(feats_b).reshape(8).sigmoid(), y, w).backward()
    g_f_from_ly = [p.grad.copy() for p in b.f.parameters()]
    g_y = [p.grad.copy() for p in b.y.parameters()]
    for p in b.params():
        p.grad = None
    feats_b2 = b.f(Tensor(x))
    domain_loss(b.d(feats_b2).softmax(axis=1), d).backward()
    g_f_from_ld = [p.grad.copy() for p in b.f.parameters()]
    g_d = [p.grad.copy() for p in b.d.parameters()]

    for p, gly, gld in zip(a.f.parameters(), g_f_from_ly, g_f_from_ld):
        np.testing.assert_allclose(p.grad, gly - lam * gld, atol=1e-10)
    for p, g in zip(a.y.parameters(), g_y):
        np.testing.assert_allclose(p.grad, g, atol=1e-10)
    for p, g in zip(a.d.parameters(), g_d):
        np.testing.assert_allclose(p.grad, g, atol=1e-10)


# ------------------------------------------------------------ dataset views

def _toy_sequences(seed=0, t=8):
    rng = np.random.default_rng(seed)
    seqs = []
    for k in range(2):
        windows = rng.standard_normal((t, 18, 500)).astype(np.float32)
        labels = np.zeros(t, dtype=np.int64)
        labels[k::3] = 1
        seqs.append(
            WindowedSequence(patient_id=f"P{k}", windows=windows, labels=labels)
        )
    return seqs


def test_source_dataset_flat_and_per_patient_views_agree():
    seqs = _toy_sequences()
    ds = SourceDataset.from_sequences(seqs)
    assert ds.n_windows == 16
    assert ds.n_domains == 2
    np.testing.assert_array_equal(ds.domains, np.repeat([0, 1], 8))
    for k, seq in enumerate(seqs):
        w, y = ds.patient_slice(k)
        np.testing.assert_array_equal(w, seq.windows)
        np.testing.assert_array_equal(y, seq.labels)


def test_stage1_rejects_single_domain():
    seqs = _toy_sequences()[:1]
    ds = SourceDataset.from_sequences(seqs)
    with pytest.raises(SingleDomainError):
        stage1_train(ds, Stage1Config(epochs=1), seed=0)


# ---------------------------------------------------------- training stages

def _quick_stage1(ds, seed=0, epochs=2, adversarial=True):
    cfg = Stage1Config(batch_size=8, epochs=epochs, adversarial=adversarial)
    return stage1_train(ds, cfg, seed=seed)


def test_stage1_is_deterministic():
    ds = SourceDataset.from_sequences(_toy_sequences())
    a = _quick_stage1(ds)
    b = _quick_stage1(ds)
    for name, arr in a.features.snapshot().items():
        np.testing.assert_array_equal(arr, b.features.snapshot()[name])
    for name, arr in a.label_head.snapshot().items():
        np.testing.assert_array_equal(arr, b.label_head.snapshot()[name])
    assert a.history == b.history
    assert len(a.history) == 2
    assert set(a.history[0]) == {"epoch", "label_loss", "domain_loss"}


def test_stage1_final_lambda_tracks_step_progress():
    ds = SourceDataset.from_sequences(_toy_sequences())
    res = _quick_stage1(ds, epochs=2)
    total = 2 * 2  # 16 windows / batch 8 -> 2 batches per epoch
    p_last = (total - 1) / total
    want = 2.0 / (1.0 + math.exp(-10.0 * p_last)) - 1.0
    assert abs(res.final_lambda - want) < 1e-12


def test_stage1_without_adversarial_keeps_lambda_zero():
    ds = SourceDataset.from_sequences(_toy_sequences())
    res = _quick_stage1(ds, adversarial=False)
    assert res.final_lambda == 0.0


def test_stage2_starts_from_stage1_cnn_exactly():
    ds = SourceDataset.from_sequences(_toy_sequences())
    s1 = _quick_stage1(ds, epochs=1)
    s2 = stage2_train(ds, s1, Stage2Config(epochs=0), seed=0)
    for name, arr in s1.features.snapshot().items():
        np.testing.assert_array_equal(arr, s2.model.features.snapshot()[name])
    assert s2.weights == s1.weights
    assert s2.history == []


def test_stage2_clamps_batch_size_with_warning():
    seqs = _toy_sequences()
    both = SourceDataset.from_sequences(seqs)
    s1 = _quick_stage1(both, epochs=1)
    solo = SourceDataset.from_sequences(seqs[:1])
    with pytest.warns(UserWarning, match="clamping"):
        stage2_train(solo, s1, Stage2Config(epochs=1), seed=0)


def test_stage2_overfits_toy_cohort():
    # Convergence probe: distinct rhythmic content for the two classes makes
    # the sequences memorizable; the training loss must fall below 0.1.
    rng = np.random.default_rng(3)
    t_axis = np.arange(500) / 500.0
    seqs = []
    for k in range(2):
        windows = rng.standard_normal((6, 18, 500)).astype(np.float32)
        labels = np.array([0, 1, 0, 1, 0, 1], dtype=np.int64)
        tone = np.sin(2.0 * np.pi * 15.0 * t_axis)[None, :].astype(np.float32)
        windows[labels == 1] += 3.0 * tone
        seqs.append(
            WindowedSequence(patient_id=f"P{k}", windows=windows, labels=labels)
        )
    ds = SourceDataset.from_sequences(seqs)
    s1 = Stage1Result(
        features=FeatureExtractor(np.random.default_rng(0)),
        label_head=LabelPredictor(np.random.default_rng(1)),
        domain_head=DomainClassifier(2, np.random.default_rng(2)),
        weights=class_weights(ds.labels),
    )
    res = stage2_train(ds, s1, Stage2Config(epochs=200), seed=0)
    assert res.history[-1]["label_loss"] < 0.1


# ------------------------------------------------------------------- probe

def test_probe_recovers_separable_domains():
    rng = np.random.default_rng(0)
    feats = rng.standard_normal((200, 40)) * 0.3
    domains = np.repeat([0, 1], 100)
    feats[domains == 1] += 1.0
    acc = domain_probe_accuracy(feats, domains, seed=0)
    assert acc >= 0.9
