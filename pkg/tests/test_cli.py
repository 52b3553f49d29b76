"""Command-line flows: synth determinism, the preprocess/train/loso/eval
pipeline on a tiny dataset, artifact layout, and failure exit codes."""

import subprocess
import sys

import numpy as np
import pytest

from tsert.checkpoint import load_checkpoint
from tsert.cli import main
from tsert.data import load_windows
from tsert.montage import CHANNELS_32
from tsert.report import read_results

SYNTH = ["synth", "--subjects", "2", "--trials", "4", "--duration", "6.0",
         "--seed", "3"]
FAST = ["--profile", "desk", "--epochs", "2"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """One tiny synthetic dataset, shared read-only across the module."""
    root = tmp_path_factory.mktemp("cli-data")
    assert main(SYNTH + ["--out", str(root / "raw")]) == 0
    assert main(["preprocess", "--dataset", str(root / "raw" / "manifest.txt"),
                 "--out", str(root / "bundle")]) == 0
    assert main(["preprocess", "--dataset", str(root / "raw" / "manifest.txt"),
                 "--out", str(root / "bundle"), "--psd"]) == 0
    return root


class TestSynth:
    def test_two_runs_write_identical_files(self, tmp_path):
        for name in ("a", "b"):
            assert main(SYNTH + ["--out", str(tmp_path / name)]) == 0
        a_files = sorted(p.name for p in (tmp_path / "a").iterdir())
        b_files = sorted(p.name for p in (tmp_path / "b").iterdir())
        assert a_files == b_files
        assert "manifest.txt" in a_files and len(a_files) == 9
        for name in a_files:
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes()

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "tsert.cli"] + SYNTH
            + ["--trials", "2", "--out", str(tmp_path / "d")],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "4 recordings" in proc.stdout


class TestPreprocess:
    def test_raw_bundle_form(self, dataset):
        samples = load_windows(dataset / "bundle" / "windows.npz")
        assert len(samples) == 8
        assert samples[0].x.shape == (32, 768)
        assert {s.subject_id for s in samples} == {1, 2}

    def test_band_power_bundle_form(self, dataset):
        samples = load_windows(dataset / "bundle" / "windows_psd.npz")
        assert len(samples) == 8
        assert samples[0].x.shape == (32, 6, 4)


class TestTrain:
    def test_writes_checkpoint_results_and_figures(self, dataset, tmp_path):
        out = tmp_path / "run"
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--out", str(out)] + FAST)
        assert rc == 0
        rows = read_results(out / "results.csv")
        assert [r["subject"] for r in rows] == ["1"]
        assert rows[0]["target"] == "arousal" and rows[0]["variant"] == "tsert"
        assert 0.0 <= float(rows[0]["accuracy"]) <= 1.0
        model = load_checkpoint(out / "checkpoint.tsck")
        assert model.config.variant == "tsert"
        for figure in ("metrics.png", "curves.png"):
            assert (out / figure).read_bytes()[:4] == b"\x89PNG"

    def test_explicit_holdout_subject(self, dataset, tmp_path):
        out = tmp_path / "run"
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--holdout", "2", "--out", str(out)] + FAST)
        assert rc == 0
        assert read_results(out / "results.csv")[0]["subject"] == "2"

    def test_band_power_variant_runs_on_psd_bundle(self, dataset, tmp_path):
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows_psd.npz"),
                   "--variant", "tsert-psd", "--out", str(tmp_path / "run")] + FAST)
        assert rc == 0

    def test_custom_partition_reaches_the_checkpoint(self, dataset, tmp_path):
        config = tmp_path / "halves.txt"
        config.write_text(
            "front-half: " + ", ".join(CHANNELS_32[:16]) + "\n"
            "back-half: " + ", ".join(CHANNELS_32[16:]) + "\n")
        out = tmp_path / "run"
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--partition", str(config), "--out", str(out)] + FAST)
        assert rc == 0
        model = load_checkpoint(out / "checkpoint.tsck")
        assert model.config.partition.names == ("front-half", "back-half")


class TestLoso:
    def test_one_row_and_one_checkpoint_per_subject(self, dataset, tmp_path):
        out = tmp_path / "run"
        rc = main(["loso", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--out", str(out)] + FAST)
        assert rc == 0
        rows = read_results(out / "results.csv")
        assert [r["subject"] for r in rows] == ["1", "2"]
        for subject in (1, 2):
            assert (out / f"fold_subject{subject:02d}.tsck").exists()
        for figure in ("metrics.png", "curves.png"):
            assert (out / figure).read_bytes()[:4] == b"\x89PNG"

    def test_eval_reuses_a_fold_checkpoint(self, dataset, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["loso", "--dataset", str(dataset / "bundle" / "windows.npz"),
                     "--out", str(out)] + FAST) == 0
        rc = main(["eval", "--checkpoint", str(out / "fold_subject01.tsck"),
                   "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--out", str(tmp_path / "eval")])
        assert rc == 0
        rows = read_results(tmp_path / "eval" / "results.csv")
        assert [r["subject"] for r in rows] == ["1", "2"]
        assert "target=arousal" in capsys.readouterr().out


class TestGradcheckCommand:
    def test_suite_passes_and_exits_zero(self, capsys):
        assert main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "worst relative error" in out
        assert "FAIL" not in out


class TestFailureModes:
    def test_missing_dataset_exits_nonzero(self, tmp_path, capsys):
        rc = main(["train", "--dataset", str(tmp_path / "nope.npz"),
                   "--out", str(tmp_path / "run")] + FAST)
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_holdout_exits_nonzero(self, dataset, tmp_path, capsys):
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--holdout", "99", "--out", str(tmp_path / "run")] + FAST)
        assert rc == 1
        assert "holdout subject 99" in capsys.readouterr().err

    def test_wrong_bundle_form_exits_nonzero(self, dataset, tmp_path, capsys):
        rc = main(["train", "--dataset", str(dataset / "bundle" / "windows.npz"),
                   "--variant", "tsert-psd", "--out", str(tmp_path / "run")] + FAST)
        assert rc == 1
        assert "re-run preprocess" in capsys.readouterr().err

    def test_corrupt_checkpoint_exits_nonzero(self, dataset, tmp_path, capsys):
        bad = tmp_path / "bad.tsck"
        bad.write_bytes(b"not a checkpoint")
        rc = main(["eval", "--checkpoint", str(bad),
                   "--dataset", str(dataset / "bundle" / "windows.npz")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err
