"""Class-weighted losses, the adversarial lambda schedule, and both
training stages.

Stage 1 trains feature extractor + label predictor + domain classifier
jointly; the gradient reversal layer between features and the domain
branch turns the single backward pass into the min-max update (features
descend the label loss while ascending the domain loss scaled by lambda).
Stage 2 freezes nothing: it initializes a CNN-BiLSTM model from the
stage-1 feature extractor and trains all of it on whole patient sequences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import WindowedSequence
from .exceptions import NumericError, SingleClassError, SingleDomainError
from .layers import BatchNorm1d
from .networks import DomainClassifier, FeatureExtractor, LabelPredictor, SequenceModel
from .optim import Adam
from .tensor import Tensor

__all__ = [
    "ClassWeights",
    "class_weights",
    "label_loss",
    "sequence_label_loss",
    "domain_loss",
    "lambda_schedule",
    "SourceDataset",
    "Stage1Config",
    "Stage2Config",
    "Stage1Result",
    "Stage2Result",
    "stage1_train",
    "stage2_train",
    "refresh_batchnorm_stats",
    "domain_probe_accuracy",
]

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class ClassWeights:
    """Inverse-frequency weights: w0*#neg = w1*#pos = N/2."""

    w0: float
    w1: float

    def per_sample(self, labels: np.ndarray) -> np.ndarray:
        return np.where(labels == 1, self.w1, self.w0)


def class_weights(labels: np.ndarray) -> ClassWeights:
    labels = np.asarray(labels)
    n = labels.size
    n_pos = int((labels == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError(
            f"class weights need both classes; got {n_pos} positives of {n} labels"
        )
    return ClassWeights(w0=n / (2.0 * n_neg), w1=n / (2.0 * n_pos))


def _clamped(probs: Tensor) -> Tensor:
    return probs.clip(PROB_CLAMP, 1.0 - PROB_CLAMP)


def label_loss(probs: Tensor, labels: np.ndarray, weights: ClassWeights) -> Tensor:
    """Weighted binary cross-entropy, mean over the batch."""
    labels = np.asarray(labels, dtype=np.float64)
    w = Tensor(weights.per_sample(labels))
    y = Tensor(labels)
    p = _clamped(probs)
    ll = y * p.log() + (1.0 - y) * (1.0 - p).log()
    return -(w * ll).mean()


def sequence_label_loss(
    probs_per_seq: list[Tensor],
    labels_per_seq: list[np.ndarray],
    weights: ClassWeights,
) -> Tensor:
    """Stage-2 loss over whole sequences: weighted BCE summed over every
    window in the batch, divided by the total window count sum(T_k)."""
    total = 0
    terms = []
    for probs, labels in zip(probs_per_seq, labels_per_seq):
        labels = np.asarray(labels, dtype=np.float64)
        total += labels.size
        w = Tensor(weights.per_sample(labels))
        y = Tensor(labels)
        p = _clamped(probs)
        ll = y * p.log() + (1.0 - y) * (1.0 - p).log()
        terms.append((w * ll).sum())
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return -acc * (1.0 / total)


def domain_loss(domain_probs: Tensor, domains: np.ndarray) -> Tensor:
    """Multiclass cross-entropy against 0-based true-domain indices."""
    domains = np.asarray(domains, dtype=np.int64)
    n = domains.size
    picked = _clamped(domain_probs)[np.arange(n), domains]
    return -picked.log().mean()


def lambda_schedule(p: float) -> float:
    """Adversarial weight ramp: 2/(1+exp(-10p)) - 1 over progress p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"training progress must lie in [0,1], got {p}")
    return 2.0 / (1.0 + math.exp(-10.0 * p)) - 1.0


@dataclass
class SourceDataset:
    """Training cohort exposed flat (stage 1) and per patient (stage 2).

    Domains are 0-based patient indices in the order the sequences were
    supplied; both stage views share the same underlying window arrays.
    """

    patient_ids: list[str]
    windows: np.ndarray  # (N, C, L) float32
    labels: np.ndarray  # (N,) int64
    domains: np.ndarray  # (N,) int64, 0-based
    bounds: list[tuple[int, int]]  # per-patient [lo, hi) into the flat arrays

    @classmethod
    def from_sequences(cls, sequences: list[WindowedSequence]) -> "SourceDataset":
        if not sequences:
            raise SingleDomainError("dataset needs at least one sequence")
        ids = [s.patient_id for s in sequences]
        windows = np.concatenate([s.windows for s in sequences], axis=0)
        labels = np.concatenate([s.labels for s in sequences])
        domains = np.concatenate(
            [np.full(s.n_windows, k, dtype=np.int64) for k, s in enumerate(sequences)]
        )
        bounds = []
        lo = 0
        for s in sequences:
            bounds.append((lo, lo + s.n_windows))
            lo += s.n_windows
        return cls(ids, windows, labels, domains, bounds)

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def n_domains(self) -> int:
        return len(self.patient_ids)

    def patient_slice(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.bounds[k]
        return self.windows[lo:hi], self.labels[lo:hi]


@dataclass(frozen=True)
class Stage1Config:
    lr: float = 0.005
    batch_size: int = 32
    epochs: int = 20
    adversarial: bool = True


@dataclass(frozen=True)
class Stage2Config:
    lr: float = 0.001
    batch_size: int = 2  # whole patient sequences per batch
    epochs: int = 6
    reuse_stage1_class_weights: bool = True


@dataclass
class Stage1Result:
    features: FeatureExtractor
    label_head: LabelPredictor
    domain_head: DomainClassifier
    weights: ClassWeights
    history: list[dict] = field(default_factory=list)  # per-epoch mean losses
    final_lambda: float = 0.0


@dataclass
class Stage2Result:
    model: SequenceModel
    weights: ClassWeights
    history: list[dict] = field(default_factory=list)


def _component_rngs(seed: int) -> dict[str, np.random.Generator]:
    """Independent streams per model component and per shuffling stage.

    Keeping the streams separate (and in a fixed spawn order) means arms
    that share a component initialize it identically from the same seed.
    """
    names = (
        "init_features", "init_label", "init_domain", "init_bilstm",
        "stage1_shuffle", "stage2_shuffle", "probe",
    )
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(ss) for name, ss in zip(names, children)}


def _check_finite(value: float, where: str) -> None:
    if not math.isfinite(value):
        raise NumericError(f"non-finite loss at {where}: {value}")


def stage1_train(
    dataset: SourceDataset, config: Stage1Config, seed: int
) -> Stage1Result:
    """Joint adversarial training of the three stage-1 networks.

    One Adam optimizer updates all parameters from a single backward pass
    of L_y + L_d, where the domain branch input passed through gradient
    reversal; with adversarial=False the reversal weight stays 0 so domain
    gradients never reach the feature extractor.
    """
    if dataset.n_domains < 2:
        raise SingleDomainError(
            f"stage 1 needs >= 2 patients (domains), got {dataset.n_domains}"
        )
    weights = class_weights(dataset.labels)
    rngs = _component_rngs(seed)
    features = FeatureExtractor(rngs["init_features"])
    label_head = LabelPredictor(rngs["init_label"])
    domain_head = DomainClassifier(dataset.n_domains, rngs["init_domain"])
    params = features.parameters() + label_head.parameters() + domain_head.parameters()
    opt = Adam(params, lr=config.lr)
    shuffle = rngs["stage1_shuffle"]

    n = dataset.n_windows
    batches_per_epoch = (n + config.batch_size - 1) // config.batch_size
    total_steps = config.epochs * batches_per_epoch
    features.train()
    label_head.train()
    domain_head.train()

    result = Stage1Result(features, label_head, domain_head, weights)
    step = 0
    for epoch in range(config.epochs):
        perm = shuffle.permutation(n)
        ly_sum = ld_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = perm[lo : lo + config.batch_size]
            lam = lambda_schedule(step / total_steps) if config.adversarial else 0.0
            x = Tensor(dataset.windows[idx].astype(np.float64))
            feats = features(x)
            y_hat = label_head(feats)
            d_hat = domain_head(T.grad_reverse(feats, lam))
            ly = label_loss(y_hat, dataset.labels[idx], weights)
            ld = domain_loss(d_hat, dataset.domains[idx])
            loss = ly + ld
            _check_finite(loss.item(), f"stage 1 epoch {epoch + 1} step {step}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            ly_sum += ly.item() * idx.size
            ld_sum += ld.item() * idx.size
            result.final_lambda = lam
            step += 1
        result.history.append(
            {
                "epoch": epoch + 1,
                "label_loss": ly_sum / n,
                "domain_loss": ld_sum / n,
            }
        )
    return result


def stage2_train(
    dataset: SourceDataset,
    stage1: Stage1Result,
    config: Stage2Config,
    seed: int,
) -> Stage2Result:
    """Train the CNN-BiLSTM on whole patient sequences.

    The CNN starts as an exact copy of the stage-1 feature extractor and
    keeps training; recurrent and output layers start fresh. Each batch
    holds whole sequences only, so the loss normalizer is the total window
    count of the batch.
    """
    rngs = _component_rngs(seed)
    features = FeatureExtractor(rngs["init_features"])
    features.load_state_arrays(stage1.features.snapshot())
    model = SequenceModel(rngs["init_bilstm"], features=features)

    if config.reuse_stage1_class_weights:
        weights = stage1.weights
    else:
        weights = class_weights(dataset.labels)

    batch_size = config.batch_size
    if dataset.n_domains < batch_size:
        warnings.warn(
            f"only {dataset.n_domains} patient(s) available; clamping stage-2 "
            f"batch size from {batch_size}",
            stacklevel=2,
        )
        batch_size = dataset.n_domains

    opt = Adam(model.parameters(), lr=config.lr)
    shuffle = rngs["stage2_shuffle"]
    model.train()

    result = Stage2Result(model, weights)
    for epoch in range(config.epochs):
        order = shuffle.permutation(dataset.n_domains)
        loss_sum = 0.0
        window_count = 0
        for lo in range(0, dataset.n_domains, batch_size):
            members = order[lo : lo + batch_size]
            seqs = [dataset.patient_slice(int(k)) for k in members]
            stacked = Tensor(
                np.concatenate([w for w, _ in seqs]).astype(np.float64)
            )
            feats = model.forward_features(stacked)
            probs, labels = [], []
            offset = 0
            for w, y in seqs:
                f = feats[offset : offset + w.shape[0]]
                probs.append(model.forward_sequence(f))
                labels.append(y)
                offset += w.shape[0]
            loss = sequence_label_loss(probs, labels, weights)
            _check_finite(loss.item(), f"stage 2 epoch {epoch + 1}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            n_batch = sum(y.size for y in labels)
            loss_sum += loss.item() * n_batch
            window_count += n_batch
        result.history.append(
            {"epoch": epoch + 1, "label_loss": loss_sum / window_count}
        )
    return result


def refresh_batchnorm_stats(module, inputs: np.ndarray) -> None:
    """Replace all batchnorm running statistics with exact full-data
    statistics via one forward pass.

    Running averages lag the weights on short trainings, which deflates
    eval-mode accuracy; a refresh makes eval mode reflect the weights the
    training actually produced.
    """
    bns = [m for m in module.modules() if isinstance(m, BatchNorm1d)]
    saved = [bn.momentum for bn in bns]
    for bn in bns:
        bn.momentum = 1.0
    module.train()
    with T.no_grad():
        module(Tensor(np.asarray(inputs, dtype=np.float64)))
    for bn, momentum in zip(bns, saved):
        bn.momentum = momentum
    module.eval()


def domain_probe_accuracy(
    feats: np.ndarray, domains: np.ndarray, seed: int, epochs: int = 60,
    lr: float = 0.001, batch_size: int = 32,
) -> float:
    """Train a fresh domain classifier on frozen features; return its
    accuracy on held-out features.

    This measures how much patient identity the representation leaks: high
    accuracy means the features still encode the domain. The probe trains
    on a stratified half of the windows and is scored on the other half;
    scoring the training windows would reward memorization (a fresh probe
    reaches ~1.0 on pure noise that way) and say nothing about the
    representation. After training, the probe's batchnorm statistics are
    refreshed over its training half so eval mode reflects the weights the
    training produced rather than a stale running average.
    """
    feats = np.asarray(feats, dtype=np.float64)
    domains = np.asarray(domains, dtype=np.int64)
    k = int(domains.max()) + 1
    rngs = _component_rngs(seed)
    probe = DomainClassifier(k, rngs["probe"])
    opt = Adam(probe.parameters(), lr=lr)
    shuffle = rngs["probe"]
    train_idx, eval_idx = [], []
    for domain in range(k):
        members = np.flatnonzero(domains == domain)
        members = members[shuffle.permutation(members.size)]
        half = (members.size + 1) // 2
        train_idx.append(members[:half])
        eval_idx.append(members[half:])
    train_idx = np.concatenate(train_idx)
    eval_idx = np.concatenate(eval_idx)
    n = train_idx.size
    probe.train()
    for _ in range(epochs):
        perm = shuffle.permutation(n)
        for lo in range(0, n, batch_size):
            idx = train_idx[perm[lo : lo + batch_size]]
            loss = domain_loss(probe(Tensor(feats[idx])), domains[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    refresh_batchnorm_stats(probe, feats[train_idx])
    with T.no_grad():
        pred = probe(Tensor(feats[eval_idx])).data.argmax(axis=1)
    return float((pred == domains[eval_idx]).mean())
