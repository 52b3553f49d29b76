"""Signal chain: decimation, band-pass behavior on analytic inputs,
windowing arithmetic, band-power features, and the synthetic generator."""

import numpy as np
import pytest

from tsert.montage import frontal_indices
from tsert.signal import (LOG_FLOOR, BandSet, FilterError, FilterSpec,
                          SignalError, bandpass, psd_features, psd_patches,
                          resample, synth_generate, window)

RNG = np.random.default_rng(21)


def sine(hz, fs, seconds, amp=1.0, phase=0.0):
    t = np.arange(round(seconds * fs)) / fs
    return amp * np.sin(2 * np.pi * hz * t + phase)


class TestResample:
    def test_four_to_one_decimation_length(self):
        x = RNG.normal(size=(3, 3072))
        y = resample(x, 512.0, 128.0)
        assert y.shape == (3, 768)

    def test_equal_rates_return_unaliased_copy(self):
        x = RNG.normal(size=(2, 64))
        y = resample(x, 128.0, 128.0)
        assert np.array_equal(x, y)
        y[0, 0] += 1.0
        assert x[0, 0] != y[0, 0]

    def test_sine_survives_decimation(self):
        x = sine(10.0, 512.0, 6.0)
        y = resample(x, 512.0, 128.0)
        ref = sine(10.0, 128.0, 6.0)
        corr = np.corrcoef(y, ref)[0, 1]
        assert corr > 0.999

    def test_rejects_fractional_and_upward_ratios(self):
        x = RNG.normal(size=128)
        with pytest.raises(SignalError):
            resample(x, 300.0, 128.0)
        with pytest.raises(SignalError):
            resample(x, 128.0, 256.0)
        with pytest.raises(SignalError):
            resample(x, 0.0, 128.0)


class TestBandpass:
    SPEC = FilterSpec()

    def test_removes_dc(self):
        x = np.ones(1280)
        y = bandpass(x, self.SPEC, 128.0)
        assert np.sum(y ** 2) < 1e-3 * np.sum(x ** 2)

    def test_passband_tone_keeps_amplitude(self):
        x = sine(10.0, 128.0, 10.0)
        y = bandpass(x, self.SPEC, 128.0)
        ratio = np.sqrt(np.mean(y ** 2) / np.mean(x ** 2))
        assert abs(ratio - 1.0) < 0.12

    def test_stopband_tone_is_attenuated(self):
        x = sine(55.0, 128.0, 10.0)
        y = bandpass(x, self.SPEC, 128.0)
        ratio = np.sqrt(np.mean(y ** 2) / np.mean(x ** 2))
        assert ratio <= 0.1  # at least 20 dB down

    def test_zero_phase_response_is_symmetric(self):
        x = np.zeros(1024)
        x[400] = 1.0
        y = bandpass(x, self.SPEC, 128.0)
        left = y[400 - 1:400 - 60:-1]
        right = y[400 + 1:400 + 60]
        assert np.allclose(left, right, atol=1e-12)

    def test_causal_variant_is_silent_before_the_impulse(self):
        x = np.zeros(1024)
        x[400] = 1.0
        y = bandpass(x, FilterSpec(zero_phase=False), 128.0)
        assert np.all(y[:400] == 0.0)
        assert np.max(np.abs(y[400:])) > 0.0

    def test_filters_along_last_axis(self):
        x = np.stack([sine(10.0, 128.0, 10.0), sine(55.0, 128.0, 10.0)])
        y = bandpass(x, self.SPEC, 128.0)
        assert y.shape == x.shape
        assert np.mean(y[0] ** 2) > 100 * np.mean(y[1] ** 2)

    def test_spec_validation(self):
        with pytest.raises(FilterError):
            bandpass(np.zeros(128), FilterSpec(low_hz=45.0, high_hz=4.0), 128.0)
        with pytest.raises(FilterError):
            bandpass(np.zeros(128), FilterSpec(high_hz=70.0), 128.0)
        with pytest.raises(FilterError):
            bandpass(np.zeros(128), FilterSpec(order=0), 128.0)

    def test_band_set_validation(self):
        with pytest.raises(FilterError):
            BandSet((("a", 4.0, 8.0), ("b", 6.0, 13.0)))
        with pytest.raises(FilterError):
            BandSet((("a", 8.0, 4.0),))


class TestWindow:
    def test_sixty_seconds_make_ten_windows(self):
        trial = RNG.normal(size=(2, 7680))
        segs = window(trial, 128.0)
        assert len(segs) == 10
        assert all(s.shape == (2, 768) for s in segs)
        assert np.array_equal(segs[3], trial[:, 3 * 768:4 * 768])

    def test_exact_fit_makes_one_window(self):
        segs = window(RNG.normal(size=768), 128.0)
        assert len(segs) == 1

    def test_remainder_is_dropped(self):
        trial = RNG.normal(size=832)  # 6.5 s at 128 Hz
        segs = window(trial, 128.0)
        assert len(segs) == 1
        assert np.array_equal(segs[0], trial[:768])

    def test_half_overlap_doubles_coverage(self):
        trial = RNG.normal(size=7680)
        segs = window(trial, 128.0, overlap=0.5)
        assert len(segs) == 19
        assert np.array_equal(segs[1], trial[384:384 + 768])

    def test_windows_are_copies(self):
        trial = np.zeros(768)
        segs = window(trial, 128.0)
        segs[0][0] = 1.0
        assert trial[0] == 0.0

    def test_short_trial_and_bad_overlap_raise(self):
        with pytest.raises(SignalError):
            window(np.zeros(700), 128.0)
        with pytest.raises(SignalError):
            window(np.zeros(768), 128.0, overlap=1.0)


class TestPsdFeatures:
    def test_alpha_tone_dominates_other_bands(self):
        bp = psd_features(sine(10.0, 128.0, 6.0), 128.0)
        margin = min(bp[1] - bp[b] for b in (0, 2, 3))
        assert margin >= np.log(10.0)  # at least 10 dB in power

    def test_doubled_noise_shifts_all_bands_by_log_four(self):
        x = RNG.normal(size=768)
        shift = psd_features(2.0 * x, 128.0) - psd_features(x, 128.0)
        assert np.allclose(shift, np.log(4.0), atol=1e-9)

    def test_silence_hits_the_floor(self):
        bp = psd_features(np.zeros(768), 128.0)
        assert np.array_equal(bp, np.full(4, np.log(LOG_FLOOR)))

    def test_feature_shape_tracks_leading_axes(self):
        bp = psd_features(RNG.normal(size=(3, 5, 768)), 128.0)
        assert bp.shape == (3, 5, 4)

    def test_band_without_bins_raises(self):
        bands = BandSet((("sliver", 60.25, 60.75),))
        with pytest.raises(SignalError):
            psd_features(RNG.normal(size=768), 128.0, bands)

    def test_patch_features_match_per_slice_features(self):
        win = RNG.normal(size=(4, 768))
        patches = psd_patches(win, 128.0, 6)
        assert patches.shape == (4, 6, 4)
        for k in range(6):
            direct = psd_features(win[:, k * 128:(k + 1) * 128], 128.0)
            assert np.allclose(patches[:, k], direct)

    def test_patch_features_need_divisible_length(self):
        with pytest.raises(SignalError):
            psd_patches(RNG.normal(size=(2, 768)), 128.0, 7)


LAYOUT = ["Fp1", "F3", "Cz", "Pz", "O1", "O2"]


class TestSynthGenerator:
    def test_same_seed_is_bit_identical(self):
        a = synth_generate(2, trials_per_subject=3, seed=9, layout=LAYOUT)
        b = synth_generate(2, trials_per_subject=3, seed=9, layout=LAYOUT)
        assert len(a) == len(b) == 6
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.samples, rb.samples)
            assert (ra.subject_id, ra.trial_id, ra.arousal_rating) == \
                   (rb.subject_id, rb.trial_id, rb.arousal_rating)

    def test_different_seed_changes_data(self):
        a = synth_generate(2, trials_per_subject=1, seed=9, layout=LAYOUT)
        b = synth_generate(2, trials_per_subject=1, seed=10, layout=LAYOUT)
        assert not np.array_equal(a[0].samples, b[0].samples)

    def test_recording_form(self):
        recs = synth_generate(2, trials_per_subject=2, seed=0, layout=LAYOUT)
        r = recs[0]
        assert r.samples.shape == (6, 6144)
        assert r.samples.dtype == np.float32
        assert r.sample_rate == 512.0
        assert r.channel_labels == LAYOUT
        assert {x.subject_id for x in recs} == {1, 2}
        assert [x.trial_id for x in recs if x.subject_id == 1] == [1, 2]

    def test_labels_are_balanced_per_subject(self):
        for trials in (4, 5):
            recs = synth_generate(3, trials_per_subject=trials, seed=3,
                                  layout=LAYOUT)
            for subject in (1, 2, 3):
                ratings = [r.arousal_rating for r in recs
                           if r.subject_id == subject]
                assert set(ratings) <= {2.0, 8.0}
                high = sum(1 for v in ratings if v == 8.0)
                assert abs(high - (trials - high)) <= 1

    def test_frontal_band_powers_separate_the_classes(self):
        recs = synth_generate(2, trials_per_subject=24, seed=5, layout=LAYOUT)
        front = frontal_indices(LAYOUT)
        rest = [i for i in range(len(LAYOUT)) if i not in front]
        stats = {True: [], False: []}
        rest_gamma = {True: [], False: []}
        for r in recs:
            bp = psd_features(r.samples.astype(np.float64), r.sample_rate)
            stats[r.arousal_rating > 5].append(
                (bp[front, 3].mean(), bp[front, 1].mean()))
            rest_gamma[r.arousal_rating > 5].append(bp[rest, 3].mean())
        hi = np.mean(stats[True], axis=0)
        lo = np.mean(stats[False], axis=0)
        assert hi[0] - lo[0] > 1.0   # high class: more frontal gamma
        assert lo[1] - hi[1] > 1.0   # low class: more frontal alpha
        off = abs(np.mean(rest_gamma[True]) - np.mean(rest_gamma[False]))
        assert off < 0.5             # elsewhere the classes look alike

    def test_needs_two_subjects(self):
        with pytest.raises(ValueError):
            synth_generate(1, trials_per_subject=2, seed=0, layout=LAYOUT)
