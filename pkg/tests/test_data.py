"""Dataset layer: rating binarization, the EEG1 container format against
hand-packed bytes, manifests, windowing into samples, splits, batching."""

import struct

import numpy as np
import pytest

from tsert.data import (DISCARD, HIGH, LOW, BadMagicError, EegFormatError,
                        EegRecording, LabelCountError, Sample,
                        TruncatedPayloadError, batch_iter, binarize, collate,
                        labeled, load_dataset, load_windows, loso_split,
                        preprocess_recording, read_manifest, read_recording,
                        save_windows, write_manifest, write_recording)

RNG = np.random.default_rng(31)


def make_recording(subject=1, trial=1, n_channels=2, n_samples=16,
                   arousal=8.0, valence=2.0, fs=128.0):
    return EegRecording(
        subject_id=subject, trial_id=trial,
        channel_labels=[f"ch{i}" for i in range(n_channels)],
        sample_rate=fs,
        samples=RNG.normal(size=(n_channels, n_samples)).astype(np.float32),
        arousal_rating=arousal, valence_rating=valence)


class TestBinarize:
    def test_reference_points(self):
        assert binarize(3.0) == LOW
        assert binarize(7.0) == HIGH
        assert binarize(5.0) == DISCARD

    def test_boundaries_are_inclusive(self):
        assert binarize(4.0) == LOW
        assert binarize(6.0) == HIGH
        assert binarize(4.5) == DISCARD
        assert binarize(5.5) == DISCARD
        assert binarize(1.0) == LOW
        assert binarize(9.0) == HIGH

    def test_out_of_range_rejected(self):
        for rating in (0.5, 9.5, -1.0):
            with pytest.raises(ValueError):
                binarize(rating)


class TestRecordingContainer:
    def test_round_trip_preserves_everything(self, tmp_path):
        rec = make_recording(subject=7, trial=13, n_channels=3, n_samples=40,
                             arousal=8.25, valence=1.5, fs=512.0)
        path = tmp_path / "trial.eeg1"
        write_recording(rec, path)
        back = read_recording(path)
        assert back.subject_id == 7 and back.trial_id == 13
        assert back.channel_labels == rec.channel_labels
        assert back.sample_rate == 512.0
        assert back.arousal_rating == 8.25 and back.valence_rating == 1.5
        assert back.samples.dtype == np.float32
        assert np.array_equal(back.samples, rec.samples)

    def test_file_size_is_predictable(self, tmp_path):
        rec = make_recording(n_channels=32, n_samples=7680)
        path = tmp_path / "trial.eeg1"
        write_recording(rec, path)
        label_bytes = sum(1 + len(lab) for lab in rec.channel_labels)
        assert path.stat().st_size == 36 + label_bytes + 32 * 7680 * 4

    def test_reader_matches_hand_packed_bytes(self, tmp_path):
        samples = np.arange(6, dtype="<f4").reshape(2, 3)
        blob = (struct.pack("<4sHIIHfQff", b"EEG1", 1, 1, 2, 2, 128.0, 3, 2.0, 8.0)
                + b"\x02Cz\x02O1" + samples.tobytes())
        path = tmp_path / "hand.eeg1"
        path.write_bytes(blob)
        rec = read_recording(path)
        assert rec.subject_id == 1 and rec.trial_id == 2
        assert rec.channel_labels == ["Cz", "O1"]
        assert np.array_equal(rec.samples, samples)
        written = tmp_path / "rewritten.eeg1"
        write_recording(rec, written)
        assert written.read_bytes() == blob

    def test_wrong_magic_is_its_own_error(self, tmp_path):
        path = tmp_path / "bad.eeg1"
        write_recording(make_recording(), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"WAVE"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_recording(path)

    def test_truncation_is_its_own_error(self, tmp_path):
        path = tmp_path / "cut.eeg1"
        write_recording(make_recording(), path)
        blob = path.read_bytes()
        for keep in (20, 38, len(blob) - 10):
            path.write_bytes(blob[:keep])
            with pytest.raises(TruncatedPayloadError):
                read_recording(path)

    def test_channel_count_mismatch_is_its_own_error(self, tmp_path):
        path = tmp_path / "extra.eeg1"
        write_recording(make_recording(), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(LabelCountError):
            read_recording(path)
        zero = struct.pack("<4sHIIHfQff", b"EEG1", 1, 1, 1, 0, 128.0, 4, 2.0, 8.0)
        path.write_bytes(zero)
        with pytest.raises(LabelCountError):
            read_recording(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "future.eeg1"
        path.write_bytes(
            struct.pack("<4sHIIHfQff", b"EEG1", 9, 1, 1, 1, 128.0, 1, 2.0, 8.0)
            + b"\x02Cz" + b"\x00" * 4)
        with pytest.raises(EegFormatError, match="version"):
            read_recording(path)

    def test_recording_validation(self):
        with pytest.raises(ValueError):
            EegRecording(1, 1, ["a", "b", "c"], 128.0,
                         np.zeros((2, 4), np.float32), 5.0, 5.0)
        with pytest.raises(ValueError):
            make_recording(arousal=0.0)


class TestManifest:
    def test_round_trip_and_loading(self, tmp_path):
        paths = []
        for subject in (1, 2, 3):
            p = tmp_path / f"s{subject}.eeg1"
            write_recording(make_recording(subject=subject), p)
            paths.append(p)
        manifest = tmp_path / "manifest.txt"
        write_manifest(paths, manifest)
        assert read_manifest(manifest) == paths
        recs = load_dataset(manifest)
        assert [r.subject_id for r in recs] == [1, 2, 3]

    def test_comments_and_blanks_ignored(self, tmp_path):
        p = tmp_path / "s1.eeg1"
        write_recording(make_recording(), p)
        manifest = tmp_path / "manifest.txt"
        manifest.write_text("# a comment\n\ns1.eeg1  # trailing note\n")
        assert read_manifest(manifest) == [p]


class TestPreprocess:
    def make_trial(self, arousal=8.0, valence=2.0):
        t = np.arange(6144) / 512.0
        x = np.stack([np.sin(2 * np.pi * 10.0 * t), np.sin(2 * np.pi * 20.0 * t)])
        return EegRecording(subject_id=3, trial_id=4, channel_labels=["Cz", "O1"],
                            sample_rate=512.0, samples=x.astype(np.float32),
                            arousal_rating=arousal, valence_rating=valence)

    def test_window_shapes_and_labels(self):
        out = preprocess_recording(self.make_trial())
        assert len(out) == 2
        for s in out:
            assert s.x.shape == (2, 768) and s.x.dtype == np.float32
            assert s.subject_id == 3 and s.trial_id == 4
            assert s.y_arousal == 1 and s.y_valence == 0

    def test_band_power_form(self):
        out = preprocess_recording(self.make_trial(), psd=True)
        assert len(out) == 2
        assert out[0].x.shape == (2, 6, 4)

    def test_discarded_rating_keeps_window_but_not_label(self):
        out = preprocess_recording(self.make_trial(arousal=5.0))
        assert all(s.y_arousal is None and s.y_valence == 0 for s in out)
        assert labeled(out, "arousal") == []
        assert len(labeled(out, "valence")) == 2


class TestWindowStore:
    def test_round_trip(self, tmp_path):
        samples = [Sample(1, 1, RNG.normal(size=(2, 8)).astype(np.float32), 1, 0),
                   Sample(2, 3, RNG.normal(size=(2, 8)).astype(np.float32), None, 1)]
        path = tmp_path / "windows.npz"
        save_windows(samples, path)
        back = load_windows(path)
        assert len(back) == 2
        for a, b in zip(samples, back):
            assert (a.subject_id, a.trial_id) == (b.subject_id, b.trial_id)
            assert (a.y_arousal, a.y_valence) == (b.y_arousal, b.y_valence)
            assert np.array_equal(a.x, b.x)

    def test_empty_save_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_windows([], tmp_path / "empty.npz")


def toy_samples(subjects=(1, 2, 3), per_subject=4):
    out = []
    for subj in subjects:
        for trial in range(per_subject):
            out.append(Sample(subj, trial + 1,
                              np.full((1, 2), subj, np.float32), trial % 2, 1))
    return out


class TestSplits:
    def test_one_fold_per_subject_without_leakage(self):
        samples = toy_samples()
        plan = loso_split(samples)
        assert [f.subject_id for f in plan.folds] == [1, 2, 3]
        for fold in plan.folds:
            assert all(s.subject_id == fold.subject_id for s in fold.test)
            assert all(s.subject_id != fold.subject_id for s in fold.train)
            assert len(fold.train) + len(fold.test) == len(samples)
        covered = [id(s) for f in plan.folds for s in f.test]
        assert sorted(covered) == sorted(id(s) for s in samples)

    def test_single_subject_rejected(self):
        with pytest.raises(ValueError):
            loso_split(toy_samples(subjects=(1,)))

    def test_leak_detection(self):
        from tsert.data import Fold, FoldPlan
        samples = toy_samples(subjects=(1, 2))
        with pytest.raises(ValueError):
            FoldPlan([Fold(subject_id=1, train=samples, test=samples[:2])])


class TestBatching:
    def test_batch_sizes_and_coverage(self):
        samples = toy_samples(subjects=(1,), per_subject=10)
        batches = list(batch_iter(samples, 4))
        assert [len(b) for b in batches] == [4, 4, 2]
        seen = [id(s) for b in batches for s in b]
        assert sorted(seen) == sorted(id(s) for s in samples)

    def test_shuffle_is_seeded(self):
        samples = toy_samples(subjects=(1,), per_subject=16)
        a = [s.trial_id for b in batch_iter(samples, 4, shuffle_seed=5) for s in b]
        b = [s.trial_id for b in batch_iter(samples, 4, shuffle_seed=5) for s in b]
        c = [s.trial_id for b in batch_iter(samples, 4, shuffle_seed=6) for s in b]
        assert a == b
        assert a != c
        assert sorted(a) == sorted(s.trial_id for s in samples)

    def test_no_seed_keeps_order(self):
        samples = toy_samples(subjects=(1,), per_subject=6)
        flat = [s for b in batch_iter(samples, 4) for s in b]
        assert [s.trial_id for s in flat] == [s.trial_id for s in samples]

    def test_bad_batch_size(self):
        with pytest.raises(ValueError):
            next(batch_iter(toy_samples(), 0))

    def test_collate_stacks_and_checks_labels(self):
        samples = toy_samples(subjects=(2,), per_subject=3)
        x, y = collate(samples, "arousal")
        assert x.shape == (3, 1, 2) and x.dtype == np.float64
        assert np.array_equal(y, [0.0, 1.0, 0.0])
        samples[1].y_arousal = None
        with pytest.raises(ValueError):
            collate(samples, "arousal")
