"""EEG preprocessing: decimation, band-pass filtering, windowing, band power.

Also houses the synthetic recording generator used for end-to-end
verification at desk scale. All functions operate on plain numpy arrays
along the last (time) axis and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .montage import CHANNELS_32, frontal_indices

LOG_FLOOR = 1e-12  # linear power floor so silent bands stay finite


class FilterError(ValueError):
    """Filter specification invalid or design unstable."""


class SignalError(ValueError):
    """Input incompatible with the requested signal operation."""


@dataclass(frozen=True)
class FilterSpec:
    """Zero-phase Butterworth band-pass description."""

    low_hz: float = 4.0
    high_hz: float = 45.0
    order: int = 4
    zero_phase: bool = True

    def validate(self, fs: float) -> None:
        if not 0.0 < self.low_hz < self.high_hz < fs / 2.0:
            raise FilterError(
                f"band [{self.low_hz}, {self.high_hz}] Hz invalid for fs={fs} "
                f"(need 0 < low < high < {fs / 2})")
        if self.order < 1:
            raise FilterError(f"order must be >= 1, got {self.order}")


@dataclass(frozen=True)
class BandSet:
    """Ordered named frequency intervals [low, high) in Hz."""

    bands: tuple[tuple[str, float, float], ...] = (
        ("theta", 4.0, 8.0),
        ("alpha", 8.0, 13.0),
        ("beta", 13.0, 30.0),
        ("gamma", 30.0, 47.0),
    )

    def __post_init__(self):
        prev_hi = 0.0
        for name, lo, hi in self.bands:
            if not 0.0 < lo < hi:
                raise FilterError(f"band {name!r} has invalid edges [{lo}, {hi})")
            if lo < prev_hi:
                raise FilterError(f"band {name!r} overlaps its predecessor")
            prev_hi = hi

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b[0] for b in self.bands)


def resample(x: np.ndarray, f_in: float, f_out: float) -> np.ndarray:
    """Anti-aliased integer decimation along the last axis.

    Only integer ratios are supported (512 -> 128 is the intended path);
    equal rates return an unmodified copy.
    """
    x = np.asarray(x)
    if f_in <= 0 or f_out <= 0:
        raise SignalError("sample rates must be positive")
    if f_in == f_out:
        return x.copy()
    q, rem = divmod(f_in, f_out)
    if rem or f_in < f_out:
        raise SignalError(
            f"resampling {f_in} -> {f_out} Hz needs an integer decimation ratio")
    return sps.decimate(x, int(q), axis=-1, zero_phase=True)


def bandpass(x: np.ndarray, spec: FilterSpec, fs: float) -> np.ndarray:
    """Recursive band-pass along the last axis, forward-backward when zero_phase."""
    spec.validate(fs)
    sos = sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="band",
                     fs=fs, output="sos")
    for section in sos:
        if np.any(np.abs(np.roots(section[3:])) >= 1.0):
            raise FilterError(f"unstable band-pass design for spec {spec} at fs={fs}")
    if spec.zero_phase:
        return sps.sosfiltfilt(sos, x, axis=-1)
    return sps.sosfilt(sos, x, axis=-1)


def clean_artifacts(x: np.ndarray) -> np.ndarray:
    """Artifact-removal slot in the preprocessing chain.

    Identity here: recordings are expected to be pre-cleaned (or
    synthetic). Swap this stage out to plug in ICA or regression-based
    cleaning without touching the rest of the chain.
    """
    return x


def window(trial: np.ndarray, fs: float, win_s: float = 6.0,
           overlap: float = 0.0) -> list[np.ndarray]:
    """Cut an N x T trial into fixed windows; the tail remainder is dropped."""
    trial = np.asarray(trial)
    if not 0.0 <= overlap < 1.0:
        raise SignalError(f"overlap must be in [0, 1), got {overlap}")
    win_len = round(win_s * fs)
    hop = round(win_len * (1.0 - overlap))
    t = trial.shape[-1]
    if t < win_len:
        raise SignalError(f"trial has {t} samples, shorter than one {win_len}-sample window")
    starts = range(0, t - win_len + 1, hop)
    return [trial[..., s:s + win_len].copy() for s in starts]


def psd_features(x: np.ndarray, fs: float, bands: BandSet | None = None) -> np.ndarray:
    """Log mean Welch power per band, along the last axis.

    Hann window, 50% overlap, segment length min(len, 128). Returns
    ``x.shape[:-1] + (len(bands),)``; silent bands floor at log(1e-12).
    """
    bands = BandSet() if bands is None else bands
    x = np.asarray(x, dtype=np.float64)
    nperseg = min(x.shape[-1], 128)
    freqs, power = sps.welch(x, fs=fs, window="hann", nperseg=nperseg,
                             noverlap=nperseg // 2, axis=-1)
    out = np.empty(x.shape[:-1] + (len(bands),))
    for b, (name, lo, hi) in enumerate(bands.bands):
        mask = (freqs >= lo) & (freqs < hi)
        if not mask.any():
            raise SignalError(
                f"band {name!r} [{lo}, {hi}) Hz contains no frequency bins at fs={fs}")
        out[..., b] = np.log(power[..., mask].mean(axis=-1) + LOG_FLOOR)
    return out


def psd_patches(win: np.ndarray, fs: float, k: int,
                bands: BandSet | None = None) -> np.ndarray:
    """Band powers per channel per slice: (N, d) -> (N, k, len(bands))."""
    win = np.asarray(win)
    d = win.shape[-1]
    if d % k:
        raise SignalError(f"window length {d} not divisible into {k} slices")
    slices = win.reshape(win.shape[:-1] + (k, d // k))
    return psd_features(slices, fs, bands)


def synth_generate(n_subjects: int, trials_per_subject: int = 40, seed: int = 0,
                   layout: list[str] | None = None, fs: float = 512.0,
                   duration_s: float = 12.0) -> list:
    """Class-conditional synthetic EEG recordings.

    High-class trials carry an elevated ~38 Hz oscillation on frontal
    channels, low-class an elevated ~10 Hz one; every channel keeps a
    small baseline of both so band powers never degenerate. Per-subject
    gain and noise floor vary; labels are balanced per subject and
    ratings are emitted as 2 or 8. Deterministic in the seed.
    """
    from .data import EegRecording

    if n_subjects < 2:
        raise ValueError(f"need at least 2 subjects, got {n_subjects}")
    labels = list(CHANNELS_32) if layout is None else list(layout)
    front = set(frontal_indices(labels))
    rng = np.random.default_rng(seed)
    t = np.arange(round(duration_s * fs)) / fs
    base_amp, boost_amp, cut_amp = 0.5, 1.5, 0.35

    recordings = []
    for subject in range(1, n_subjects + 1):
        gain = rng.uniform(0.8, 1.25)
        noise_std = rng.uniform(0.3, 0.6)
        classes = np.arange(trials_per_subject) % 2
        rng.shuffle(classes)
        for trial, is_high in enumerate(classes, start=1):
            x = rng.normal(0.0, noise_std, (len(labels), t.size))
            alpha_hz = rng.uniform(9.0, 11.0)
            gamma_hz = rng.uniform(36.0, 40.0)
            for ch in range(len(labels)):
                if ch in front:
                    a_amp = cut_amp if is_high else boost_amp
                    g_amp = boost_amp if is_high else cut_amp
                else:
                    a_amp = g_amp = base_amp
                jitter = rng.uniform(0.9, 1.1)
                x[ch] += a_amp * jitter * np.sin(
                    2 * np.pi * alpha_hz * t + rng.uniform(0, 2 * np.pi))
                x[ch] += g_amp * jitter * np.sin(
                    2 * np.pi * gamma_hz * t + rng.uniform(0, 2 * np.pi))
            rating = 8.0 if is_high else 2.0
            recordings.append(EegRecording(
                subject_id=subject, trial_id=trial, channel_labels=list(labels),
                sample_rate=float(fs), samples=(gain * x).astype(np.float32),
                arousal_rating=rating, valence_rating=rating))
    return recordings
