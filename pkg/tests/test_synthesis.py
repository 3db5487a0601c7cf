"""Synthetic cohort invariants: determinism, annotations, and domain shift."""

import numpy as np
import pytest
from scipy.signal import welch

from seizdann.exceptions import CohortSpecError
from seizdann.preprocessing import preprocess_recording
from seizdann.synthesis import ELECTRODES, CohortSpec, synthesize_cohort

# Short recordings keep these tests quick; the statistical invariants do
# not depend on the default 320 s duration.
QUICK = dict(duration_mean_s=60.0, duration_sd_s=5.0, seizure_mean_s=12.0,
             seizure_sd_s=2.0)


def quick_spec(**kw):
    merged = {"n_patients": 3, "seed": 0, **QUICK, **kw}
    return CohortSpec(**merged)


def band_power(x, fs, lo, hi):
    freqs, psd = welch(x, fs=fs, nperseg=1024, axis=-1)
    sel = (freqs >= lo) & (freqs <= hi)
    return psd[..., sel].mean(axis=-1)


# -------------------------------------------------------------- validation

def test_spec_rejects_single_patient():
    with pytest.raises(CohortSpecError):
        CohortSpec(n_patients=1)


def test_spec_rejects_negative_shift():
    with pytest.raises(CohortSpecError):
        CohortSpec(n_patients=2, shift_strength=-0.5)


def test_spec_rejects_bad_rate_and_durations():
    with pytest.raises(CohortSpecError):
        CohortSpec(n_patients=2, fs=0.0)
    with pytest.raises(CohortSpecError):
        CohortSpec(n_patients=2, duration_mean_s=-3.0)


def test_unfittable_seizure_raises():
    with pytest.raises(CohortSpecError, match="does not fit"):
        synthesize_cohort(
            CohortSpec(n_patients=2, duration_mean_s=40.0, duration_sd_s=0.0,
                       seizure_mean_s=39.0, seizure_sd_s=0.0)
        )


# ------------------------------------------------------------ basic output

def test_cohort_is_deterministic():
    a = synthesize_cohort(quick_spec())
    b = synthesize_cohort(quick_spec())
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra.data, rb.data)
        assert ra.seizure_intervals == rb.seizure_intervals
        assert ra.patient_id == rb.patient_id


def test_different_seeds_differ():
    a = synthesize_cohort(quick_spec(seed=0))
    b = synthesize_cohort(quick_spec(seed=1))
    assert not np.array_equal(a[0].data, b[0].data)


def test_exactly_one_interval_inside_recording():
    for rec in synthesize_cohort(quick_spec(n_patients=4)):
        assert len(rec.seizure_intervals) == 1
        onset, offset = rec.seizure_intervals[0]
        assert 0.0 < onset < offset < rec.duration_s


def test_channel_layout_and_rounding():
    rec = synthesize_cohort(quick_spec())[0]
    assert list(rec.channels) == list(ELECTRODES)
    assert rec.data.shape[0] == 21
    np.testing.assert_array_equal(rec.data, np.round(rec.data, 3))


def test_cohort_feeds_preprocessing():
    rec = synthesize_cohort(quick_spec())[0]
    seq = preprocess_recording(rec)
    assert seq.windows.shape[1:] == (18, 500)
    assert seq.n_positive > 0
    assert seq.n_positive < seq.n_windows


# ------------------------------------------------------------ domain shift

def test_seizure_windows_have_elevated_band_power():
    # Learnability floor: ictal windows carry more 10-25 Hz power than the
    # same patient's background windows, median ratio above 1.5.
    for rec in synthesize_cohort(quick_spec()):
        seq = preprocess_recording(rec)
        power = (
            band_power(seq.windows.astype(np.float64), rec.fs, 10.0, 25.0)
            .mean(axis=1)
        )
        ictal = np.median(power[seq.labels == 1])
        rest = np.median(power[seq.labels == 0])
        assert ictal / rest > 1.5


def _patient_signature(rec):
    """Log band powers in five sub-bands, averaged over channels."""
    edges = [(8, 12), (12, 16), (16, 21), (21, 26), (26, 30)]
    return np.log(
        [band_power(rec.data, rec.fs, lo, hi).mean() for lo, hi in edges]
    )


def _mean_pairwise_distance(recs):
    sigs = [_patient_signature(r) for r in recs]
    dists = [
        np.linalg.norm(a - b)
        for i, a in enumerate(sigs)
        for b in sigs[i + 1 :]
    ]
    return float(np.mean(dists))


def test_shift_strength_monotonically_widens_cohort():
    divergences = [
        _mean_pairwise_distance(
            synthesize_cohort(quick_spec(n_patients=4, shift_strength=s))
        )
        for s in (0.0, 0.5, 1.0)
    ]
    assert divergences[0] < divergences[1] < divergences[2]


def test_zero_shift_backgrounds_agree_in_band():
    recs = synthesize_cohort(quick_spec(n_patients=4, shift_strength=0.0))
    powers = []
    for rec in recs:
        labels = rec.sample_labels()
        background = rec.data[:, labels == 0]
        powers.append(band_power(background, rec.fs, 8.0, 30.0).mean())
    powers = np.asarray(powers)
    assert np.abs(powers - powers.mean()).max() / powers.mean() <= 0.10


def test_outlier_patient_has_extreme_spectrum():
    recs = synthesize_cohort(quick_spec(n_patients=4, outlier_patient=True))
    slopes = []
    for rec in recs:
        low = band_power(rec.data, rec.fs, 8.0, 14.0).mean()
        high = band_power(rec.data, rec.fs, 22.0, 30.0).mean()
        slopes.append(np.log(low / high))
    assert slopes[0] > max(slopes[1:]) + 1.0
