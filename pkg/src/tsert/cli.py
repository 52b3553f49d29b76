"""Command-line interface.

Subcommands: ``synth`` (write a synthetic EEG1 dataset), ``preprocess``
(EEG1 -> windowed sample bundle), ``train`` (one held-out subject),
``loso`` (full leave-one-subject-out run), ``eval`` (checkpoint on a
dataset), ``gradcheck`` (finite-difference suite). Every failure exits
nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import checkpoint as ckpt, checks, data as dat, report, signal as dsp, train as trn
from .montage import parse_partition_file
from .train import profile_configs, with_overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsert",
        description="Hierarchical transformer EEG emotion classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic EEG1 dataset")
    p.add_argument("--subjects", type=int, default=6)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=12.0, help="trial length, seconds")
    p.add_argument("--fs", type=float, default=512.0, help="recording sample rate, Hz")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="EEG1 dataset -> windowed sample bundle")
    p.add_argument("--dataset", type=Path, required=True, help="manifest file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--psd", action="store_true", help="store band powers, not raw windows")
    p.set_defaults(func=cmd_preprocess)

    for name, helptext in (("train", "train with one held-out subject"),
                           ("loso", "full leave-one-subject-out cross-validation")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--dataset", type=Path, required=True,
                       help="manifest file or preprocessed .npz bundle")
        p.add_argument("--target", choices=("arousal", "valence"), default="arousal")
        p.add_argument("--variant", default="tsert",
                       choices=("tsert", "sert", "tert", "stert", "tsert-psd"))
        p.add_argument("--profile", choices=("paper", "desk"), default="desk")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--partition", type=Path, default=None,
                       help="region config: one 'name: label, label, ...' line per region")
        p.add_argument("--epochs", type=int, default=None, help="override max epochs")
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--out", type=Path, required=True, help="run directory")
        if name == "train":
            p.add_argument("--holdout", type=int, default=None,
                           help="test subject id (default: lowest)")
            p.set_defaults(func=cmd_train)
        else:
            p.set_defaults(func=cmd_loso)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="optional results directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def cmd_synth(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    recordings = dsp.synth_generate(args.subjects, args.trials, seed=args.seed,
                                    fs=args.fs, duration_s=args.duration)
    paths = []
    for rec in recordings:
        path = args.out / f"s{rec.subject_id:02d}_t{rec.trial_id:02d}.eeg1"
        dat.write_recording(rec, path)
        paths.append(path)
    manifest = args.out / "manifest.txt"
    dat.write_manifest(paths, manifest)
    print(f"wrote {len(paths)} recordings ({args.subjects} subjects x "
          f"{args.trials} trials) and {manifest}")
    return 0


def _load_samples(dataset: Path, psd: bool) -> tuple[list[dat.Sample], list[str]]:
    """Manifest or .npz bundle -> samples (+ channel labels when available)."""
    if dataset.suffix == ".npz":
        samples = dat.load_windows(dataset)
        want_ndim = 3 if psd else 2
        if samples and samples[0].x.ndim != want_ndim:
            raise ValueError(
                f"{dataset} holds {'band-power' if samples[0].x.ndim == 3 else 'raw'} "
                f"windows, but this run needs the other form; re-run preprocess")
        return samples, []
    recordings = dat.load_dataset(dataset)
    samples = []
    for rec in recordings:
        samples.extend(dat.preprocess_recording(rec, psd=psd))
    return samples, (recordings[0].channel_labels if recordings else [])


def cmd_preprocess(args) -> int:
    samples, _ = _load_samples(args.dataset, psd=args.psd)
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / ("windows_psd.npz" if args.psd else "windows.npz")
    dat.save_windows(samples, out)
    kind = "band-power" if args.psd else "raw"
    print(f"wrote {len(samples)} {kind} samples to {out}")
    return 0


def _configs_from_args(args, channel_labels: list[str]):
    partition = None
    if args.partition is not None:
        labels = channel_labels or list(dsp.CHANNELS_32)
        partition = parse_partition_file(args.partition, labels)
    mconfig, tconfig = profile_configs(args.profile, variant=args.variant,
                                       target=args.target, partition=partition,
                                       seed=args.seed)
    if args.epochs is not None:
        tconfig = with_overrides(tconfig, max_epochs=args.epochs,
                                 patience=min(tconfig.patience, args.epochs))
    tconfig = with_overrides(tconfig, batch_size=args.batch_size, lr=args.lr)
    return mconfig, tconfig


def cmd_train(args) -> int:
    samples, labels = _load_samples(args.dataset, psd=args.variant == "tsert-psd")
    mconfig, tconfig = _configs_from_args(args, labels)
    usable = dat.labeled(samples, args.target)
    subjects = sorted({s.subject_id for s in usable})
    holdout = subjects[0] if args.holdout is None else args.holdout
    if holdout not in subjects:
        raise ValueError(f"holdout subject {holdout} not in dataset (has {subjects})")
    test = [s for s in usable if s.subject_id == holdout]
    rest = [s for s in usable if s.subject_id != holdout]
    train_s, val_s = trn.split_train_val(rest, tconfig.val_fraction, tconfig.seed)
    print(f"holdout subject {holdout}: train {len(train_s)}, val {len(val_s)}, "
          f"test {len(test)}")
    model, curves = trn.train_fold(train_s, val_s, tconfig, mconfig, log=True)
    _, acc, f1 = trn.evaluate(model, test, batch_size=tconfig.batch_size)
    result = trn.FoldResult([trn.FoldEntry(subject_id=holdout, accuracy=acc, f1=f1)])

    args.out.mkdir(parents=True, exist_ok=True)
    ckpt.save_checkpoint(model, args.out / "checkpoint.tsck")
    report.write_results(result, args.target, mconfig.variant, args.out / "results.csv")
    report.render_fold_metrics(result, args.out / "metrics.png")
    report.render_curves([curves], args.out / "curves.png", labels=[f"subject {holdout}"])
    report.print_results(result, args.target, mconfig.variant)
    print(f"run artifacts in {args.out}")
    return 0


def cmd_loso(args) -> int:
    samples, labels = _load_samples(args.dataset, psd=args.variant == "tsert-psd")
    mconfig, tconfig = _configs_from_args(args, labels)
    result, all_curves, models = trn.run_loso(samples, tconfig, mconfig, log=True)

    args.out.mkdir(parents=True, exist_ok=True)
    for entry, model in zip(result.entries, models):
        ckpt.save_checkpoint(model, args.out / f"fold_subject{entry.subject_id:02d}.tsck")
    report.write_results(result, args.target, mconfig.variant, args.out / "results.csv")
    report.render_fold_metrics(result, args.out / "metrics.png")
    report.render_curves(all_curves, args.out / "curves.png",
                         labels=[f"subject {e.subject_id}" for e in result.entries])
    report.print_results(result, args.target, mconfig.variant)
    print(f"run artifacts in {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = ckpt.load_checkpoint(args.checkpoint)
    config = model.config
    samples, _ = _load_samples(args.dataset, psd=config.variant == "tsert-psd")
    usable = dat.labeled(samples, config.target)
    if not usable:
        raise ValueError(f"dataset has no labeled samples for target {config.target}")
    entries = []
    for subject in sorted({s.subject_id for s in usable}):
        subset = [s for s in usable if s.subject_id == subject]
        _, acc, f1 = trn.evaluate(model, subset)
        entries.append(trn.FoldEntry(subject_id=subject, accuracy=acc, f1=f1))
    result = trn.FoldResult(entries)
    report.print_results(result, config.target, config.variant)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        report.write_results(result, config.target, config.variant,
                             args.out / "results.csv")
        report.render_fold_metrics(result, args.out / "metrics.png",
                                   title="checkpoint metrics per subject")
        print(f"results in {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    results = checks.gradcheck_suite()
    worst = 0.0
    for name, err in results:
        status = "ok" if err < checks.GRAD_TOL else "FAIL"
        print(f"{status:>4}  {err:.3e}  {name}")
        worst = max(worst, err)
    print(f"worst relative error {worst:.3e} (tolerance {checks.GRAD_TOL:.0e})")
    return 0 if worst < checks.GRAD_TOL else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary turns failures into exit codes
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
