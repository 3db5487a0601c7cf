"""Seeded synthetic EEG cohort with controllable inter-patient domain shift.

Each patient gets an independent random stream spawned from the cohort
seed, so recordings are deterministic per (spec, seed) and a patient's
noise realization never depends on how the others turned out. The
background of every electrode is filtered noise: broadband noise with a
1/f-like spectral tilt, and, on a fixed electrode subset, a narrowband
idle rhythm, the way resting EEG carries an alpha-range rhythm whose
peak frequency differs from person to person. The domain shift lives in
seeded per-patient draws of the background parameters: the spectral
tilt, the overall amplitude scale, and the idle-rhythm peak frequency.
The amplitude scale washes out under per-channel standardization; the
tilt and the rhythm peak survive every preprocessing step as in-band
spectral shape. Both are concentrated on the fixed electrode subset, so
they reach a known set of montage channels and an adversarially trained
network can discard them without giving up the seizure signal. The
idle rhythm is constant over the whole recording, so within a patient
it carries no seizure information, while across patients it is a
shortcut a naive detector happily absorbs. Every background component
is normalized to unit expected power, which keeps the patient cues pure
spectral shapes rather than power cues.

Seizures are rhythmic bursts inside 10-25 Hz whose amplitude ramps from
1x to 3x the channel background, with random gain and phase per
electrode so bipolar differencing cannot cancel them. The focus is
central and parasagittal: electrodes carrying the patient cues stay
burst-free, which keeps seizure evidence and patient identity on
disjoint channel sets. The burst frequency is patient specific, drawn
from disjoint per-patient slots, so a detector that memorizes
training-patient frequencies transfers poorly to a held-out patient
while a frequency-agnostic one transfers well.

Samples are rounded to 1e-3 microvolts, keeping recording CSVs compact
while leaving signal statistics untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EegRecording
from .exceptions import CohortSpecError

__all__ = ["ELECTRODES", "CohortSpec", "synthesize_cohort", "synthesize_patient"]

# The 19 scalp electrodes the longitudinal bipolar montage consumes, plus
# earlobe references the montage must ignore.
ELECTRODES = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
    "T3", "C3", "Cz", "C4", "T4",
    "T5", "P3", "Pz", "P4", "T6",
    "O1", "O2", "A1", "A2",
)

_BASE_AMP_UV = 20.0
_ROUND_DECIMALS = 3
# The 1/f shaping plateaus below this frequency, like an AC-coupled
# amplifier. Without the floor the power normalization is dominated by a
# handful of near-DC bins, which would couple a channel's in-band level to
# the recording duration and to single low-frequency noise draws.
_AC_FLOOR_HZ = 0.5

# Electrodes whose background carries the patient-specific cues: the two
# mid-temporal sites generate the idle rhythm and the tilt offset, so the
# cues reach exactly four montage derivations (F7-T3, T3-T5, F8-T4,
# T4-T6). The seizure focus spares the whole temporal chain interior:
# those four derivations stay burst-free, which means a network can
# silence the patient identity by zeroing a handful of input channels at
# zero cost to seizure evidence.
_RHYTHM_ELECTRODES = frozenset({"T3", "T4"})
_BURST_FREE_ELECTRODES = frozenset({"F7", "T3", "T5", "F8", "T4", "T6"})
# Idle rhythm: narrowband filtered noise whose center frequency is the
# patient's strongest identity cue. It deliberately shares the seizure
# band: a detector is forced to represent power around these frequencies
# anyway, so a naive one reads the rhythm as patient-flavored seizure
# evidence, while the rhythm's constant amplitude keeps it useless for
# the label within any one patient. _RHYTHM_FRACTION is the rhythm's
# share of background amplitude on the nuisance electrodes.
_IDLE_CENTER_HZ = 17.5
_IDLE_SPREAD_HZ = 16.0
_IDLE_WIDTH_HZ = 1.0
_RHYTHM_FRACTION = 0.5
# Spectral-tilt offset between the extremes of a fully shifted cohort,
# applied on the rhythm electrodes only.
_TILT_SPREAD = 0.8
# Seizure burst frequency band across the patient slots. Kept narrow so
# that the burst itself identifies the class, not the patient: a wide
# burst-frequency spread turns the seizure signature into a second
# patient fingerprint that no detector should be asked to discard.
_BURST_BASE_HZ = 15.0
_BURST_SPAN_HZ = 2.0


@dataclass(frozen=True)
class CohortSpec:
    """Cohort-level generation parameters.

    Defaults follow the target recording statistics: duration 320 +- 45 s
    with one 47 +- 23 s seizure per recording. shift_strength 0 makes all
    patients statistically identical up to noise; raising it widens the
    per-patient tilt and amplitude-scale distributions. outlier_patient
    gives patient 0 an extreme spectral tilt and amplitude.
    """

    n_patients: int
    seed: int = 0
    fs: float = 500.0
    duration_mean_s: float = 320.0
    duration_sd_s: float = 45.0
    seizure_mean_s: float = 47.0
    seizure_sd_s: float = 23.0
    shift_strength: float = 1.0
    outlier_patient: bool = False

    def __post_init__(self):
        if self.n_patients < 2:
            raise CohortSpecError(f"cohort needs >= 2 patients, got {self.n_patients}")
        if self.fs <= 0:
            raise CohortSpecError(f"sampling rate must be positive, got {self.fs}")
        if self.duration_mean_s <= 0 or self.seizure_mean_s <= 0:
            raise CohortSpecError("durations must be positive")
        if self.shift_strength < 0:
            raise CohortSpecError(
                f"shift_strength must be >= 0, got {self.shift_strength}"
            )


def _shaped_noise(
    rng: np.random.Generator, n: int, shaping: np.ndarray
) -> np.ndarray:
    """Gaussian noise with amplitude spectrum proportional to `shaping`.

    The shaping filter is normalized so the expected mean square is exactly
    1. Normalizing the filter instead of each realization keeps expected
    band powers identical across channels, patients, and recording lengths;
    realized power still varies with the draw, but over thousands of bins
    rather than the few near-DC ones that dominate an unfloored 1/f
    spectrum.
    """
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    # Parseval weights: interior rfft bins count twice, DC and (for even n)
    # the Nyquist bin once.
    weights = np.full(shaping.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    expected_ms = float((weights * shaping**2).sum()) / n
    return np.fft.irfft(spectrum * shaping, n=n) / np.sqrt(expected_ms)


def _tilt_shaping(freqs: np.ndarray, tilt: float) -> np.ndarray:
    """1/f^tilt amplitude shaping above the AC floor, flat below it."""
    shaping = np.zeros_like(freqs)
    shaping[1:] = np.maximum(freqs[1:], _AC_FLOOR_HZ) ** (-tilt / 2.0)
    return shaping


def _peak_shaping(freqs: np.ndarray, center_hz: float) -> np.ndarray:
    """Gaussian narrowband amplitude shaping, zero at DC."""
    shaping = np.exp(-0.5 * ((freqs - center_hz) / _IDLE_WIDTH_HZ) ** 2)
    shaping[0] = 0.0
    return shaping


def synthesize_patient(
    spec: CohortSpec, index: int, child_seed: np.random.SeedSequence
) -> EegRecording:
    rng = np.random.default_rng(child_seed)
    s = spec.shift_strength

    duration = max(30.0, rng.normal(spec.duration_mean_s, spec.duration_sd_s))
    seizure_len = max(5.0, rng.normal(spec.seizure_mean_s, spec.seizure_sd_s))
    patient_id = f"P{index:02d}"
    # A margin on both sides keeps the burst strictly inside the recording.
    margin = 0.05 * duration
    if seizure_len >= duration - 2.0 * margin:
        raise CohortSpecError(
            f"patient {patient_id}: seizure duration {seizure_len:.1f}s does not fit "
            f"inside recording duration {duration:.1f}s"
        )
    onset = rng.uniform(margin, duration - seizure_len - margin)
    offset = onset + seizure_len

    # Per-patient draws come from disjoint slots: slot k of n for patient k,
    # jittered within the middle half, so no two patients in a cohort share
    # a tilt exponent or a burst frequency even at small cohort sizes.
    tilt_slot = (index + rng.uniform(0.25, 0.75)) / spec.n_patients
    tilt_shift = s * _TILT_SPREAD * (tilt_slot - 0.5)
    base_tilt = 1.7
    base_amp = _BASE_AMP_UV * np.exp(s * rng.uniform(-0.5, 0.5))
    if spec.outlier_patient and index == 0:
        base_tilt += 2.0
        base_amp *= 3.0
    freq_slot = (index + rng.uniform(0.25, 0.75)) / spec.n_patients
    seizure_hz = _BURST_BASE_HZ + _BURST_SPAN_HZ * freq_slot
    # Idle-rhythm peak: the cohort-common center at zero shift, spreading
    # across 11.5-23.5 Hz with the patient slot at full shift. Clipped to
    # stay inside the passband for extreme shift strengths.
    idle_hz = float(
        np.clip(
            _IDLE_CENTER_HZ + _IDLE_SPREAD_HZ * s * (tilt_slot - 0.5), 8.5, 29.0
        )
    )

    n = int(round(duration * spec.fs))
    t = np.arange(n) / spec.fs
    sz_mask = (t >= onset) & (t < offset)
    ramp = np.zeros(n)
    if sz_mask.any():
        ramp[sz_mask] = 1.0 + 2.0 * (t[sz_mask] - onset) / seizure_len

    freqs = np.fft.rfftfreq(n, d=1.0 / spec.fs)
    idle_shape = _peak_shaping(freqs, idle_hz)
    broad_scale = np.sqrt(1.0 - _RHYTHM_FRACTION**2)

    data = np.empty((len(ELECTRODES), n))
    for row, electrode in enumerate(ELECTRODES):
        rhythmic = electrode in _RHYTHM_ELECTRODES
        amp = base_amp * rng.uniform(0.9, 1.1)
        tilt = base_tilt + (tilt_shift if rhythmic else 0.0)
        broad = _shaped_noise(rng, n, _tilt_shaping(freqs, tilt))
        if rhythmic:
            rhythm = _shaped_noise(rng, n, idle_shape)
            background = amp * (
                broad_scale * broad + _RHYTHM_FRACTION * rhythm
            )
        else:
            background = amp * broad
        # Burst gain and phase are drawn for every electrode to keep the
        # stream layout fixed; the gain applies only outside the spared
        # temporal zone.
        burst_amp = amp * rng.uniform(0.5, 1.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        if electrode in _BURST_FREE_ELECTRODES:
            data[row] = background
        else:
            burst = burst_amp * ramp * np.sin(
                2.0 * np.pi * seizure_hz * t + phase
            )
            data[row] = background + burst
    np.round(data, _ROUND_DECIMALS, out=data)

    return EegRecording(
        patient_id=patient_id,
        fs=spec.fs,
        channels=list(ELECTRODES),
        data=data,
        seizure_intervals=[(onset, offset)],
    )


def synthesize_cohort(spec: CohortSpec) -> list[EegRecording]:
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_patients)
    return [
        synthesize_patient(spec, i, child) for i, child in enumerate(children)
    ]
