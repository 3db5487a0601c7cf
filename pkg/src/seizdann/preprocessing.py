"""Recording-level preprocessing as sklearn-style transformers.

The fixed pipeline is montage -> bandpass -> standardize -> segment. Each
stage is a stateless transformer over EegRecording objects (fit is a no-op,
kept for sklearn compatibility); `preprocess_recording` runs the whole chain
and `make_preprocessing_pipeline` packages it as an sklearn Pipeline.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, sosfiltfilt
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.pipeline import Pipeline

from .data import EegRecording, WindowedSequence
from .exceptions import (
    DataError,
    MissingElectrodeError,
    RecordingTooShortError,
    SignalTooShortError,
)
from .validation import as_recording_list

__all__ = [
    "MONTAGE_PAIRS",
    "BipolarMontage",
    "BandpassFilter",
    "ChannelStandardizer",
    "WindowSegmenter",
    "preprocess_recording",
    "make_preprocessing_pipeline",
]

# Longitudinal bipolar (double banana) chains, in fixed output order:
# left temporal, left parasagittal, midline, right parasagittal, right
# temporal. Earlobe electrodes (A1, A2) are never referenced.
_CHAINS = (
    ("Fp1", "F7", "T3", "T5", "O1"),
    ("Fp1", "F3", "C3", "P3", "O1"),
    ("Fz", "Cz", "Pz"),
    ("Fp2", "F4", "C4", "P4", "O2"),
    ("Fp2", "F8", "T4", "T6", "O2"),
)
MONTAGE_PAIRS: tuple[tuple[str, str], ...] = tuple(
    (chain[i], chain[i + 1]) for chain in _CHAINS for i in range(len(chain) - 1)
)
assert len(MONTAGE_PAIRS) == 18


class _RecordingTransformer(BaseEstimator, TransformerMixin):
    """Maps one or many EegRecording objects; subclasses define _transform_one."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        recs, single = as_recording_list(X)
        out = [self._transform_one(r) for r in recs]
        return out[0] if single else out

    def _transform_one(self, rec: EegRecording):
        raise NotImplementedError


class BipolarMontage(_RecordingTransformer):
    """Referential channels -> 18 longitudinal bipolar channels."""

    def _transform_one(self, rec: EegRecording) -> EegRecording:
        index = {name: i for i, name in enumerate(rec.channels)}
        needed = sorted({e for pair in MONTAGE_PAIRS for e in pair})
        absent = [e for e in needed if e not in index]
        if absent:
            raise MissingElectrodeError(
                f"patient {rec.patient_id}: missing electrode(s) {absent}"
            )
        data = np.empty((len(MONTAGE_PAIRS), rec.n_samples))
        names = []
        for row, (anode, cathode) in enumerate(MONTAGE_PAIRS):
            data[row] = rec.data[index[anode]] - rec.data[index[cathode]]
            names.append(f"{anode}-{cathode}")
        return EegRecording(
            patient_id=rec.patient_id,
            fs=rec.fs,
            channels=names,
            data=data,
            seizure_intervals=list(rec.seizure_intervals),
        )


class BandpassFilter(_RecordingTransformer):
    """Zero-phase Butterworth band-pass, applied forward then backward."""

    def __init__(self, low_hz: float = 8.0, high_hz: float = 30.0, order: int = 4):
        self.low_hz = low_hz
        self.high_hz = high_hz
        self.order = order

    def _design(self, fs: float) -> np.ndarray:
        if not 0 < self.low_hz < self.high_hz:
            raise DataError(
                f"need 0 < low < high, got ({self.low_hz}, {self.high_hz})"
            )
        if fs <= 2.0 * self.high_hz:
            raise DataError(
                f"sampling rate {fs} Hz cannot represent a {self.high_hz} Hz band edge"
            )
        return butter(
            self.order, [self.low_hz, self.high_hz], btype="bandpass", fs=fs,
            output="sos",
        )

    def _transform_one(self, rec: EegRecording) -> EegRecording:
        sos = self._design(rec.fs)
        # Default sosfiltfilt edge padding; signals at or below it cannot
        # be filtered without wrap-around artifacts.
        ntaps = 2 * sos.shape[0] + 1
        padlen = 3 * (ntaps - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum()))
        if rec.n_samples <= padlen:
            raise SignalTooShortError(
                f"patient {rec.patient_id}: {rec.n_samples} samples, but zero-phase "
                f"filtering needs more than {padlen}"
            )
        data = sosfiltfilt(sos, rec.data, axis=1)
        return EegRecording(
            patient_id=rec.patient_id,
            fs=rec.fs,
            channels=list(rec.channels),
            data=data,
            seizure_intervals=list(rec.seizure_intervals),
        )


class ChannelStandardizer(_RecordingTransformer):
    """Zero mean, unit variance per channel over the whole recording.

    Uses the population standard deviation; a (near-)constant channel maps
    to all zeros via the epsilon floor on the denominator.
    """

    def __init__(self, eps: float = 1e-12):
        self.eps = eps

    def _transform_one(self, rec: EegRecording) -> EegRecording:
        if rec.n_samples < 2:
            raise DataError(
                f"patient {rec.patient_id}: standardization needs >= 2 samples"
            )
        mean = rec.data.mean(axis=1, keepdims=True)
        sd = rec.data.std(axis=1, keepdims=True)
        data = (rec.data - mean) / np.maximum(sd, self.eps)
        return EegRecording(
            patient_id=rec.patient_id,
            fs=rec.fs,
            channels=list(rec.channels),
            data=data,
            seizure_intervals=list(rec.seizure_intervals),
        )


class WindowSegmenter(BaseEstimator, TransformerMixin):
    """Non-overlapping windows of window_len samples with majority labels.

    The trailing partial window is dropped; label ties go to seizure.
    Window data is quantized to float32 here, at the storage boundary.
    """

    def __init__(self, window_len: int = 500):
        self.window_len = window_len

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        recs, single = as_recording_list(X)
        out = [self._transform_one(r) for r in recs]
        return out[0] if single else out

    def _transform_one(self, rec: EegRecording) -> WindowedSequence:
        length = int(self.window_len)
        if length < 1:
            raise DataError(f"window_len must be >= 1, got {self.window_len}")
        n_windows = rec.n_samples // length
        if n_windows < 1:
            raise RecordingTooShortError(
                f"patient {rec.patient_id}: {rec.n_samples} samples is shorter than "
                f"one {length}-sample window"
            )
        used = n_windows * length
        windows = (
            rec.data[:, :used]
            .reshape(rec.n_channels, n_windows, length)
            .transpose(1, 0, 2)
            .astype(np.float32)
        )
        per_sample = rec.sample_labels()[:used].reshape(n_windows, length)
        seizure_counts = per_sample.sum(axis=1)
        labels = (2 * seizure_counts >= length).astype(np.int64)
        return WindowedSequence(
            patient_id=rec.patient_id, windows=windows, labels=labels
        )


def preprocess_recording(
    rec: EegRecording,
    low_hz: float = 8.0,
    high_hz: float = 30.0,
    filter_order: int = 4,
    window_len: int = 500,
) -> WindowedSequence:
    """Full fixed-order pipeline: montage, bandpass, standardize, segment."""
    out = BipolarMontage().transform(rec)
    out = BandpassFilter(low_hz=low_hz, high_hz=high_hz, order=filter_order).transform(out)
    out = ChannelStandardizer().transform(out)
    return WindowSegmenter(window_len=window_len).transform(out)


def make_preprocessing_pipeline(
    low_hz: float = 8.0,
    high_hz: float = 30.0,
    filter_order: int = 4,
    window_len: int = 500,
) -> Pipeline:
    return Pipeline(
        [
            ("montage", BipolarMontage()),
            ("bandpass", BandpassFilter(low_hz=low_hz, high_hz=high_hz, order=filter_order)),
            ("standardize", ChannelStandardizer()),
            ("segment", WindowSegmenter(window_len=window_len)),
        ]
    )
