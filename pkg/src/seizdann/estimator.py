"""sklearn-style estimator wrapping the two-stage training pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .data import WindowedSequence
from .exceptions import DataError
from .metrics import detect, select_threshold
from .networks import (
    predict_sequence_probabilities,
    predict_window_probabilities,
)
from .training import (
    SourceDataset,
    Stage1Config,
    Stage2Config,
    stage1_train,
    stage2_train,
)
from .validation import ensure_training_sequences

__all__ = ["SeizureDetector"]


class SeizureDetector(ClassifierMixin, BaseEstimator):
    """Cross-patient seizure detector with optional adversarial training.

    fit consumes a list of WindowedSequence (one per training patient;
    labels ride inside the sequences, so y is ignored and kept only for
    sklearn API compatibility). Stage 1 trains the per-window CNN with a
    patient-domain adversary; stage 2, enabled by use_bilstm, trains the
    CNN-BiLSTM sequence model initialized from the stage-1 CNN. The
    decision threshold maximizes F1 on the training windows.

    Fitted attributes: stage1_ (per-window networks and class weights),
    model_ (the sequence model, when use_bilstm), threshold_, classes_,
    n_domains_.
    """

    def __init__(
        self,
        use_adversarial: bool = True,
        use_bilstm: bool = True,
        stage1_lr: float = 0.005,
        stage1_batch_size: int = 32,
        stage1_epochs: int = 20,
        stage2_lr: float = 0.001,
        stage2_batch_size: int = 2,
        stage2_epochs: int = 6,
        reuse_stage1_class_weights: bool = True,
        random_state: int = 0,
    ):
        self.use_adversarial = use_adversarial
        self.use_bilstm = use_bilstm
        self.stage1_lr = stage1_lr
        self.stage1_batch_size = stage1_batch_size
        self.stage1_epochs = stage1_epochs
        self.stage2_lr = stage2_lr
        self.stage2_batch_size = stage2_batch_size
        self.stage2_epochs = stage2_epochs
        self.reuse_stage1_class_weights = reuse_stage1_class_weights
        self.random_state = random_state

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y=None) -> "SeizureDetector":
        sequences = ensure_training_sequences(X)
        dataset = SourceDataset.from_sequences(sequences)
        stage1_cfg = Stage1Config(
            lr=self.stage1_lr,
            batch_size=self.stage1_batch_size,
            epochs=self.stage1_epochs,
            adversarial=self.use_adversarial,
        )
        self.stage1_ = stage1_train(dataset, stage1_cfg, self.random_state)
        if self.use_bilstm:
            stage2_cfg = Stage2Config(
                lr=self.stage2_lr,
                batch_size=self.stage2_batch_size,
                epochs=self.stage2_epochs,
                reuse_stage1_class_weights=self.reuse_stage1_class_weights,
            )
            self.stage2_ = stage2_train(
                dataset, self.stage1_, stage2_cfg, self.random_state
            )
            self.model_ = self.stage2_.model
        train_probs = np.concatenate(
            [self.predict_proba(seq) for seq in sequences]
        )
        self.threshold_ = select_threshold(train_probs, dataset.labels)
        self.classes_ = np.array([0, 1])
        self.n_domains_ = dataset.n_domains
        return self

    # -- inference -----------------------------------------------------------

    @staticmethod
    def _as_windows(item) -> np.ndarray:
        if isinstance(item, WindowedSequence):
            return item.windows
        arr = np.asarray(item)
        if arr.ndim != 3:
            raise DataError(
                f"expected a WindowedSequence or (T, channels, length) array, "
                f"got shape {arr.shape}"
            )
        return arr

    def predict_proba(self, X) -> np.ndarray | list[np.ndarray]:
        """Per-window seizure probabilities for one sequence or a list."""
        check_is_fitted(self, "stage1_")
        if isinstance(X, (list, tuple)):
            return [self.predict_proba(item) for item in X]
        windows = self._as_windows(X)
        if self.use_bilstm:
            return predict_sequence_probabilities(self.model_, windows)
        return predict_window_probabilities(
            self.stage1_.features, self.stage1_.label_head, windows
        )

    def predict(self, X) -> np.ndarray | list[np.ndarray]:
        """Thresholded 0/1 decisions per window."""
        check_is_fitted(self, "threshold_")
        probs = self.predict_proba(X)
        if isinstance(probs, list):
            return [detect(p, self.threshold_) for p in probs]
        return detect(probs, self.threshold_)
