"""Core data containers: referential/bipolar recordings and windowed sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import AnnotationRangeError, DataError

__all__ = ["EegRecording", "WindowedSequence", "sample_labels"]


@dataclass
class EegRecording:
    """A multichannel EEG recording with seizure annotations.

    data is (n_channels, n_samples) float64 in microvolts. seizure_intervals
    holds (onset_s, offset_s) pairs in seconds from recording start.
    """

    patient_id: str
    fs: float
    channels: list[str]
    data: np.ndarray
    seizure_intervals: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DataError(
                f"recording data must be 2-D (channels, samples), got ndim={self.data.ndim}"
            )
        if len(self.channels) != self.data.shape[0]:
            raise DataError(
                f"{len(self.channels)} channel names but {self.data.shape[0]} signal rows"
            )
        if self.fs <= 0:
            raise DataError(f"sampling rate must be positive, got {self.fs}")
        for onset, offset in self.seizure_intervals:
            if not (0.0 <= onset < offset):
                raise AnnotationRangeError(
                    f"patient {self.patient_id}: bad interval ({onset}, {offset})"
                )
            if offset > self.duration_s + 1e-9:
                raise AnnotationRangeError(
                    f"patient {self.patient_id}: interval ({onset}, {offset}) ends after "
                    f"recording duration {self.duration_s:.3f}s"
                )

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.fs

    def sample_labels(self) -> np.ndarray:
        return sample_labels(self.n_samples, self.fs, self.seizure_intervals)


def sample_labels(
    n_samples: int, fs: float, intervals: list[tuple[float, float]]
) -> np.ndarray:
    """Binary per-sample labels from second-valued seizure intervals.

    Sample i covers time [i/fs, (i+1)/fs) and is labeled 1 when that span
    intersects an interval: indices ceil(onset*fs) <= i < ceil(offset*fs),
    with a relative epsilon so that exact grid hits (e.g. onset 0.5 s at
    500 Hz -> index 250) are not pushed one sample late by rounding noise.
    """
    labels = np.zeros(n_samples, dtype=np.int64)
    for onset, offset in intervals:
        start = int(math.ceil(onset * fs - 1e-9))
        stop = int(math.ceil(offset * fs - 1e-9))
        start = max(start, 0)
        stop = min(stop, n_samples)
        if start < stop:
            labels[start:stop] = 1
    return labels


@dataclass
class WindowedSequence:
    """One patient's recording cut into fixed-length labeled windows.

    windows is (T, n_channels, window_len) float32; labels is (T,) int64
    with 1 marking seizure-majority windows. domain is the 0-based patient
    index within a training cohort, -1 until assigned.
    """

    patient_id: str
    windows: np.ndarray
    labels: np.ndarray
    domain: int = -1

    def __post_init__(self) -> None:
        self.windows = np.asarray(self.windows, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.windows.ndim != 3:
            raise DataError(
                f"windows must be 3-D (T, channels, length), got ndim={self.windows.ndim}"
            )
        if self.labels.shape != (self.windows.shape[0],):
            raise DataError(
                f"label count {self.labels.shape} does not match window count "
                f"{self.windows.shape[0]}"
            )
        bad = set(np.unique(self.labels)) - {0, 1}
        if bad:
            raise DataError(f"labels must be 0/1, found {sorted(bad)}")

    @property
    def n_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())
