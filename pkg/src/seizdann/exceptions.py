"""Exception types raised across the package.

ValueError subclasses signal contract violations on otherwise-valid calls;
the dedicated classes below name the failure modes callers may want to
catch individually (missing electrodes, malformed files, degenerate label
sets, non-finite losses).
"""

__all__ = [
    "SeizDannError",
    "ConfigError",
    "DataError",
    "NumericError",
    "MissingElectrodeError",
    "SignalTooShortError",
    "RecordingTooShortError",
    "SingleClassError",
    "SingleDomainError",
    "MalformedRecordingError",
    "AnnotationRangeError",
    "WeightsFormatError",
    "CohortSpecError",
]


class SeizDannError(Exception):
    """Base class for package-specific failures."""


class ConfigError(SeizDannError):
    """Invalid run configuration (unknown keys, out-of-range values)."""


class DataError(SeizDannError):
    """Input data violates a documented invariant."""


class NumericError(SeizDannError):
    """Training produced a non-finite loss or parameter."""


class MissingElectrodeError(DataError):
    """A referential recording lacks an electrode the montage requires."""


class SignalTooShortError(DataError):
    """Signal shorter than the zero-phase filter warm-up length."""


class RecordingTooShortError(DataError):
    """Recording shorter than one analysis window."""


class SingleClassError(DataError):
    """Label set contains only one class where both are required."""


class SingleDomainError(DataError):
    """Dataset spans a single patient; the adversarial term is degenerate."""


class MalformedRecordingError(DataError):
    """Recording CSV or annotation sidecar failed to parse or validate."""


class AnnotationRangeError(MalformedRecordingError):
    """A seizure interval lies outside the recording duration."""


class WeightsFormatError(DataError):
    """Weights file is corrupt, truncated, or structurally incompatible."""


class CohortSpecError(DataError):
    """Synthetic cohort parameters are internally inconsistent."""
