"""Recordings on disk, label binarization, LOSO folds, and batching.

The on-disk container is "EEG1", a little-endian binary layout:

  magic ``EEG1`` | version u16 | subject u32 | trial u32 | n_channels u16
  | sample_rate f32 | n_samples u64 | arousal f32 | valence f32
  | n_channels x (label length u8, ASCII bytes) | samples f32, channel-major

A dataset is a plain-text manifest: one EEG1 path per line, relative to
the manifest, ``#`` comments allowed. Recordings coerce their float
fields to f32 precision on construction so write -> read is an identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import signal as dsp

FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIHfQff")
_MAGIC = b"EEG1"

LOW, HIGH, DISCARD = "low", "high", "discard"


class EegFormatError(ValueError):
    """EEG1 stream violates the format."""


class BadMagicError(EegFormatError):
    """File does not start with the EEG1 magic."""


class TruncatedPayloadError(EegFormatError):
    """File ends before the declared header/labels/samples."""


class LabelCountError(EegFormatError):
    """Channel table inconsistent with the declared channel count."""


@dataclass
class EegRecording:
    """One trial's multichannel signal plus its self-assessment ratings."""

    subject_id: int
    trial_id: int
    channel_labels: list[str]
    sample_rate: float
    samples: np.ndarray  # (n_channels, n_samples) float32
    arousal_rating: float
    valence_rating: float

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-d, got shape {self.samples.shape}")
        if len(self.channel_labels) != self.samples.shape[0]:
            raise ValueError(
                f"{len(self.channel_labels)} labels for {self.samples.shape[0]} channel rows")
        self.sample_rate = float(np.float32(self.sample_rate))
        self.arousal_rating = float(np.float32(self.arousal_rating))
        self.valence_rating = float(np.float32(self.valence_rating))
        for name, value in (("arousal", self.arousal_rating), ("valence", self.valence_rating)):
            if not 1.0 <= value <= 9.0:
                raise ValueError(f"{name} rating {value} outside [1, 9]")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class Sample:
    """One windowed segment; labels are None where the rating was discarded."""

    subject_id: int
    trial_id: int
    x: np.ndarray  # (N, d) float32, or (N, K, n_bands) for band-power input
    y_arousal: int | None
    y_valence: int | None

    def label(self, target: str) -> int | None:
        if target == "arousal":
            return self.y_arousal
        if target == "valence":
            return self.y_valence
        raise ValueError(f"unknown target {target!r}")


def binarize(rating: float) -> str:
    """Map a 1-9 self-assessment rating to low / high / discard."""
    if not 1.0 <= rating <= 9.0:
        raise ValueError(f"rating {rating} outside [1, 9]")
    if rating <= 4.0:
        return LOW
    if rating >= 6.0:
        return HIGH
    return DISCARD


def _binary_label(rating: float) -> int | None:
    cls = binarize(rating)
    return None if cls == DISCARD else int(cls == HIGH)


# -- persistence ----------------------------------------------------------------


def write_recording(rec: EegRecording, path: str | Path) -> None:
    path = Path(path)
    header = _HEADER.pack(_MAGIC, FORMAT_VERSION, rec.subject_id, rec.trial_id,
                          rec.n_channels, rec.sample_rate, rec.n_samples,
                          rec.arousal_rating, rec.valence_rating)
    chunks = [header]
    for label in rec.channel_labels:
        raw = label.encode("ascii")
        if not 0 < len(raw) < 256:
            raise ValueError(f"channel label {label!r} must be 1-255 ASCII bytes")
        chunks.append(bytes([len(raw)]) + raw)
    chunks.append(rec.samples.astype("<f4", copy=False).tobytes(order="C"))
    path.write_bytes(b"".join(chunks))


def read_recording(path: str | Path) -> EegRecording:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise BadMagicError(f"{path}: not an EEG1 file (magic {blob[:4]!r})")
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: header cut short at {len(blob)} bytes")
    (_, version, subject, trial, n_channels, sample_rate,
     n_samples, arousal, valence) = _HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise EegFormatError(f"{path}: unsupported format version {version}")
    if n_channels == 0:
        raise LabelCountError(f"{path}: zero channels declared")
    offset = _HEADER.size
    labels = []
    for _ in range(n_channels):
        if offset >= len(blob):
            raise TruncatedPayloadError(f"{path}: channel table cut short")
        length = blob[offset]
        offset += 1
        if length == 0:
            raise LabelCountError(f"{path}: empty channel label in table")
        raw = blob[offset:offset + length]
        if len(raw) < length:
            raise TruncatedPayloadError(f"{path}: channel label cut short")
        labels.append(raw.decode("ascii"))
        offset += length
    payload = n_channels * n_samples * 4
    if len(blob) - offset < payload:
        raise TruncatedPayloadError(
            f"{path}: expected {payload} sample bytes, found {len(blob) - offset}")
    if len(blob) - offset > payload:
        raise LabelCountError(
            f"{path}: {len(blob) - offset - payload} trailing bytes; "
            f"channel count likely wrong")
    samples = np.frombuffer(blob, dtype="<f4", count=n_channels * n_samples,
                            offset=offset).reshape(n_channels, n_samples)
    return EegRecording(subject_id=subject, trial_id=trial, channel_labels=labels,
                        sample_rate=sample_rate, samples=samples,
                        arousal_rating=arousal, valence_rating=valence)


def write_manifest(paths: list[Path], manifest_path: str | Path) -> None:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    lines = [str(Path(p).resolve().relative_to(root.resolve())) for p in paths]
    manifest_path.write_text("".join(line + "\n" for line in lines))


def read_manifest(manifest_path: str | Path) -> list[Path]:
    manifest_path = Path(manifest_path)
    paths = []
    for raw in manifest_path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            paths.append(manifest_path.parent / line)
    return paths


def load_dataset(manifest_path: str | Path) -> list[EegRecording]:
    return [read_recording(p) for p in read_manifest(manifest_path)]


# -- preprocessing chain ----------------------------------------------------------


def preprocess_recording(rec: EegRecording, target_fs: float = 128.0,
                         filter_spec: dsp.FilterSpec | None = None,
                         win_s: float = 6.0, psd: bool = False, patches: int = 6,
                         bands: dsp.BandSet | None = None) -> list[Sample]:
    """Resample, band-pass, and window one recording into samples.

    With ``psd`` set, each window is reduced to per-slice band powers
    (N, patches, len(bands)) for the band-power model input.
    """
    spec = dsp.FilterSpec() if filter_spec is None else filter_spec
    x = dsp.resample(rec.samples.astype(np.float64), rec.sample_rate, target_fs)
    x = dsp.clean_artifacts(x)
    x = dsp.bandpass(x, spec, target_fs)
    y_a = _binary_label(rec.arousal_rating)
    y_v = _binary_label(rec.valence_rating)
    out = []
    for win in dsp.window(x, target_fs, win_s):
        feat = dsp.psd_patches(win, target_fs, patches, bands) if psd else win
        out.append(Sample(subject_id=rec.subject_id, trial_id=rec.trial_id,
                          x=feat.astype(np.float32), y_arousal=y_a, y_valence=y_v))
    return out


def labeled(samples: list[Sample], target: str) -> list[Sample]:
    """Samples whose rating survived binarization for this target."""
    return [s for s in samples if s.label(target) is not None]


def save_windows(samples: list[Sample], path: str | Path) -> None:
    """Store preprocessed samples as one compressed .npz bundle."""
    if not samples:
        raise ValueError("no samples to save")
    to_int = lambda y: -1 if y is None else y  # noqa: E731 - tiny field codec
    np.savez_compressed(
        Path(path),
        x=np.stack([s.x for s in samples]).astype(np.float32),
        subject=np.array([s.subject_id for s in samples], dtype=np.int32),
        trial=np.array([s.trial_id for s in samples], dtype=np.int32),
        y_arousal=np.array([to_int(s.y_arousal) for s in samples], dtype=np.int8),
        y_valence=np.array([to_int(s.y_valence) for s in samples], dtype=np.int8))


def load_windows(path: str | Path) -> list[Sample]:
    with np.load(Path(path)) as z:
        x, subject, trial = z["x"], z["subject"], z["trial"]
        y_a, y_v = z["y_arousal"], z["y_valence"]
    from_int = lambda y: None if y < 0 else int(y)  # noqa: E731
    return [Sample(subject_id=int(subject[i]), trial_id=int(trial[i]), x=x[i],
                   y_arousal=from_int(y_a[i]), y_valence=from_int(y_v[i]))
            for i in range(len(subject))]


# -- splitting and batching -------------------------------------------------------


@dataclass
class Fold:
    subject_id: int
    train: list[Sample]
    test: list[Sample]


@dataclass
class FoldPlan:
    folds: list[Fold]

    def __post_init__(self):
        for fold in self.folds:
            train_subjects = {s.subject_id for s in fold.train}
            if fold.subject_id in train_subjects:
                raise ValueError(f"subject {fold.subject_id} leaked into its own train set")


def loso_split(samples: list[Sample]) -> FoldPlan:
    """One fold per subject: that subject tests, everyone else trains."""
    subjects = sorted({s.subject_id for s in samples})
    if len(subjects) < 2:
        raise ValueError(f"leave-one-subject-out needs >=2 subjects, got {len(subjects)}")
    folds = [Fold(subject_id=subj,
                  train=[s for s in samples if s.subject_id != subj],
                  test=[s for s in samples if s.subject_id == subj])
             for subj in subjects]
    return FoldPlan(folds)


def batch_iter(samples: list[Sample], batch_size: int, shuffle_seed: int | None = None):
    """Yield batches covering every sample once; the last may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(samples))
    if shuffle_seed is not None:
        np.random.default_rng(shuffle_seed).shuffle(order)
    for start in range(0, len(samples), batch_size):
        yield [samples[i] for i in order[start:start + batch_size]]


def collate(batch: list[Sample], target: str) -> tuple[np.ndarray, np.ndarray]:
    """Stack a batch into (x, y) float64 arrays; every sample must be labeled."""
    ys = [s.label(target) for s in batch]
    if any(y is None for y in ys):
        raise ValueError(f"batch contains samples discarded for target {target!r}")
    x = np.stack([s.x for s in batch]).astype(np.float64)
    return x, np.asarray(ys, dtype=np.float64)
