"""Result files and figures for training runs.

Every run directory gets a delimited results file (one row per fold:
subject, target, variant, accuracy, f1) plus rendered figures: test
metrics per held-out subject and the training-loss curves.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .train import FoldResult

RESULTS_FIELDS = ("subject", "target", "variant", "accuracy", "f1")


def write_results(result: FoldResult, target: str, variant: str,
                  path: str | Path) -> None:
    """One CSV row per held-out subject, in fold order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_FIELDS)
        for e in result.entries:
            writer.writerow([e.subject_id, target, variant,
                             f"{e.accuracy:.6f}", f"{e.f1:.6f}"])


def read_results(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def print_results(result: FoldResult, target: str, variant: str) -> None:
    print(f"target={target} variant={variant}")
    print(f"{'subject':>8}  {'accuracy':>8}  {'f1':>8}")
    for e in result.entries:
        print(f"{e.subject_id:>8}  {e.accuracy:>8.4f}  {e.f1:>8.4f}")
    print(f"{'mean':>8}  {result.mean_accuracy:>8.4f}  {result.mean_f1:>8.4f}")


def render_fold_metrics(result: FoldResult, path: str | Path,
                        title: str = "test metrics per held-out subject") -> None:
    """Bar chart of per-fold accuracy and F1 with the mean marked."""
    subjects = [str(e.subject_id) for e in result.entries]
    x = range(len(subjects))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.38
    ax.bar([i - width / 2 for i in x], [e.accuracy for e in result.entries],
           width, label="accuracy")
    ax.bar([i + width / 2 for i in x], [e.f1 for e in result.entries],
           width, label="f1")
    ax.axhline(result.mean_accuracy, linestyle="--", linewidth=1,
               label=f"mean acc {result.mean_accuracy:.3f}")
    ax.axhline(0.5, color="gray", linewidth=0.8, label="chance")
    ax.set_xticks(list(x), subjects)
    ax.set_xlabel("held-out subject")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_curves(all_curves: list[dict[str, list[float]]], path: str | Path,
                  labels: list[str] | None = None) -> None:
    """Training and monitored loss per epoch, one pair of lines per fold."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, curves in enumerate(all_curves):
        label = labels[i] if labels else f"fold {i + 1}"
        epochs = range(len(curves["train_loss"]))
        line, = ax.plot(epochs, curves["train_loss"], label=f"{label} train")
        ax.plot(epochs, curves["monitor_loss"], linestyle="--",
                color=line.get_color(), alpha=0.7)
    ax.set_xlabel("epoch")
    ax.set_ylabel("binary cross-entropy")
    ax.set_title("loss curves (solid train, dashed monitor)")
    ax.legend(fontsize=7, ncols=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
