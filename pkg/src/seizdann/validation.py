"""Input validation helpers shared by transformers and the estimator."""

from __future__ import annotations

import numpy as np

from .data import EegRecording, WindowedSequence
from .exceptions import DataError, SingleClassError, SingleDomainError

__all__ = [
    "as_recording_list",
    "ensure_finite_recording",
    "ensure_training_sequences",
]


def as_recording_list(X) -> tuple[list[EegRecording], bool]:
    """Normalize transformer input to a list; flag whether it was singular."""
    if isinstance(X, EegRecording):
        return [X], True
    if isinstance(X, (list, tuple)) and all(isinstance(r, EegRecording) for r in X):
        return list(X), False
    raise DataError(
        f"expected an EegRecording or a list of them, got {type(X).__name__}"
    )


def ensure_finite_recording(rec: EegRecording) -> None:
    if not np.isfinite(rec.data).all():
        raise DataError(f"patient {rec.patient_id}: recording contains non-finite values")


def ensure_training_sequences(sequences) -> list[WindowedSequence]:
    """Validate a training cohort: typed, multi-patient, both classes present."""
    if not isinstance(sequences, (list, tuple)) or not sequences:
        raise DataError("training data must be a non-empty list of WindowedSequence")
    for seq in sequences:
        if not isinstance(seq, WindowedSequence):
            raise DataError(f"expected WindowedSequence, got {type(seq).__name__}")
    ids = [s.patient_id for s in sequences]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"duplicate patient ids in training data: {dupes}")
    if len(sequences) < 2:
        raise SingleDomainError(
            "adversarial training needs at least 2 patients (domains), got 1"
        )
    labels = np.concatenate([s.labels for s in sequences])
    present = set(np.unique(labels))
    if present != {0, 1}:
        raise SingleClassError(
            f"training labels must include both classes, found only {sorted(present)}"
        )
    return list(sequences)
