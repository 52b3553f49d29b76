"""Training loop, evaluation metrics, and the leave-one-subject-out driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import data as dat, tensor as tz
from .model import ModelConfig, TsertModel, build_variant
from .montage import RegionPartition
from .optim import Adam, EarlyStopping, cosine_lr
from .tensor import Tensor

BCE_EPS = 1e-7
PRED_THRESHOLD = 0.5


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 512
    max_epochs: int = 80
    patience: int = 10
    seed: int = 0
    val_fraction: float = 0.2
    min_delta: float = 1e-5

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError(
                f"patience {self.patience} outside [1, max_epochs={self.max_epochs}]")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError(f"val_fraction {self.val_fraction} outside [0, 1)")


@dataclass
class FoldEntry:
    subject_id: int
    accuracy: float
    f1: float

    def __post_init__(self):
        for name, v in (("accuracy", self.accuracy), ("f1", self.f1)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} {v} outside [0, 1]")


@dataclass
class FoldResult:
    """Per-subject test metrics and their means."""

    entries: list[FoldEntry] = field(default_factory=list)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([e.accuracy for e in self.entries]))

    @property
    def mean_f1(self) -> float:
        return float(np.mean([e.f1 for e in self.entries]))


def bce_loss(p: Tensor, y: np.ndarray | Tensor) -> Tensor:
    """Binary cross-entropy, averaged over the batch; p clamped to (0, 1)."""
    y = y if isinstance(y, Tensor) else Tensor(np.asarray(y, dtype=np.float64))
    p = tz.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    losses = -(y * tz.log(p) + (1.0 - y) * tz.log(1.0 - p))
    return losses.mean()


def metrics(preds: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(accuracy, F1 on the high class); zero-denominator F1 is 0."""
    preds = np.asarray(preds).astype(int)
    labels = np.asarray(labels).astype(int)
    if preds.size == 0 or preds.shape != labels.shape:
        raise ValueError(f"need matching nonempty vectors, got {preds.shape}, {labels.shape}")
    acc = float(np.mean(preds == labels))
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return acc, f1


def split_train_val(samples: list[dat.Sample], val_fraction: float,
                    seed: int) -> tuple[list[dat.Sample], list[dat.Sample]]:
    """Hold out a fraction of each subject's trials (whole trials, not segments)."""
    if val_fraction == 0.0:
        return list(samples), []
    rng = np.random.default_rng(seed)
    by_subject: dict[int, list[tuple[int, int]]] = {}
    for s in samples:
        key = (s.subject_id, s.trial_id)
        trials = by_subject.setdefault(s.subject_id, [])
        if key not in trials:
            trials.append(key)
    val_keys = set()
    for subject in sorted(by_subject):
        trials = by_subject[subject]
        n_val = min(round(val_fraction * len(trials)), len(trials) - 1)
        picked = rng.permutation(len(trials))[:n_val]
        val_keys.update(trials[i] for i in picked)
    train = [s for s in samples if (s.subject_id, s.trial_id) not in val_keys]
    val = [s for s in samples if (s.subject_id, s.trial_id) in val_keys]
    return train, val


def evaluate(model: TsertModel, samples: list[dat.Sample], batch_size: int = 256
             ) -> tuple[float, float, float]:
    """(mean BCE loss, accuracy, F1) of a frozen model on labeled samples."""
    target = model.config.target
    losses, preds, labels = [], [], []
    with tz.no_grad():
        for batch in dat.batch_iter(samples, batch_size):
            x, y = dat.collate(batch, target)
            p = model(Tensor(x))
            losses.append(bce_loss(p, y).item() * len(batch))
            preds.extend((p.data >= PRED_THRESHOLD).astype(int).tolist())
            labels.extend(y.astype(int).tolist())
    loss = float(sum(losses) / len(samples))
    acc, f1 = metrics(np.asarray(preds), np.asarray(labels))
    return loss, acc, f1


def state_dict(model: TsertModel) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in model.named_params()}


def load_state(model: TsertModel, state: dict[str, np.ndarray]) -> None:
    for name, t in model.named_params():
        if name not in state:
            raise KeyError(f"state is missing parameter {name!r}")
        if state[name].shape != t.data.shape:
            raise ValueError(f"{name}: state shape {state[name].shape} != {t.data.shape}")
        t.data = state[name].copy()


def train_fold(train_samples: list[dat.Sample], val_samples: list[dat.Sample],
               tconfig: TrainConfig, mconfig: ModelConfig,
               log: bool = False) -> tuple[TsertModel, dict[str, list[float]]]:
    """Train one model; early-stops on validation loss and restores the best epoch.

    Without validation samples the monitor falls back to the epoch's mean
    training loss. Deterministic under (seed, configs, data).
    """
    target = mconfig.target
    model = build_variant(mconfig, seed=tconfig.seed)
    opt = Adam(model.parameters(), lr=tconfig.lr)
    stopper = EarlyStopping(tconfig.patience, tconfig.min_delta)
    curves: dict[str, list[float]] = {"train_loss": [], "monitor_loss": [], "lr": []}
    best_state = state_dict(model)
    best_loss = math.inf

    for epoch in range(tconfig.max_epochs):
        lr_t = cosine_lr(epoch, tconfig.max_epochs, tconfig.lr)
        epoch_loss, seen = 0.0, 0
        for batch in dat.batch_iter(train_samples, tconfig.batch_size,
                                    shuffle_seed=tconfig.seed * 100003 + epoch):
            x, y = dat.collate(batch, target)
            p = model(Tensor(x))
            loss = bce_loss(p, y)
            opt.zero_grad()
            tz.backward(loss)
            opt.step(lr_t)
            epoch_loss += loss.item() * len(batch)
            seen += len(batch)
        train_loss = epoch_loss / seen
        if val_samples:
            monitor, _, _ = evaluate(model, val_samples, batch_size=tconfig.batch_size)
        else:
            monitor = train_loss
        curves["train_loss"].append(train_loss)
        curves["monitor_loss"].append(monitor)
        curves["lr"].append(lr_t)
        if log:
            print(f"  epoch {epoch:3d}  lr {lr_t:.2e}  train {train_loss:.4f}  "
                  f"monitor {monitor:.4f}")
        if monitor < best_loss - tconfig.min_delta:
            best_loss = monitor
            best_state = state_dict(model)
        if stopper.update(monitor, epoch):
            break

    load_state(model, best_state)
    return model, curves


def run_loso(samples: list[dat.Sample], tconfig: TrainConfig, mconfig: ModelConfig,
             log: bool = False) -> tuple[FoldResult, list[dict[str, list[float]]],
                                         list[TsertModel]]:
    """Train and test one model per held-out subject.

    Returns per-fold metrics (in subject order), the training curves, and
    the fold models.
    """
    usable = dat.labeled(samples, mconfig.target)
    plan = dat.loso_split(usable)
    result = FoldResult()
    all_curves, models = [], []
    for fold in plan.folds:
        train_s, val_s = split_train_val(fold.train, tconfig.val_fraction, tconfig.seed)
        if log:
            print(f"fold: subject {fold.subject_id} out "
                  f"(train {len(train_s)}, val {len(val_s)}, test {len(fold.test)})")
        model, curves = train_fold(train_s, val_s, tconfig, mconfig, log=log)
        _, acc, f1 = evaluate(model, fold.test, batch_size=tconfig.batch_size)
        if log:
            print(f"  subject {fold.subject_id}: acc {acc:.3f}  f1 {f1:.3f}")
        result.entries.append(FoldEntry(subject_id=fold.subject_id, accuracy=acc, f1=f1))
        all_curves.append(curves)
        models.append(model)
    return result, all_curves, models


# -- profiles -------------------------------------------------------------------


def profile_configs(profile: str, variant: str = "tsert", target: str = "arousal",
                    partition: RegionPartition | None = None, seed: int = 0,
                    ) -> tuple[ModelConfig, TrainConfig]:
    """Named hyperparameter bundles.

    ``paper``: the published protocol (widths 64/32/64, batch 512, lr 1e-4).
    ``desk``: same architecture at widths 16/8/16, batch 64, lr 3e-3, sized
    so a full cross-validation run finishes on a laptop CPU in minutes.
    """
    partition = RegionPartition.default_32() if partition is None else partition
    if profile == "paper":
        mconfig = ModelConfig(variant=variant, target=target, partition=partition,
                              n_channels=partition.n_channels)
        tconfig = TrainConfig(lr=1e-4, batch_size=512, max_epochs=80, patience=10, seed=seed)
    elif profile == "desk":
        mconfig = ModelConfig(variant=variant, target=target, partition=partition,
                              n_channels=partition.n_channels, d_t=16, d_e=8, d_b=16)
        tconfig = TrainConfig(lr=3e-3, batch_size=64, max_epochs=80, patience=10, seed=seed)
    else:
        raise ValueError(f"unknown profile {profile!r}; choose paper or desk")
    return mconfig, tconfig


def with_overrides(tconfig: TrainConfig, **kwargs) -> TrainConfig:
    """A copy of tconfig with non-None overrides applied."""
    updates = {k: v for k, v in kwargs.items() if v is not None}
    return replace(tconfig, **updates) if updates else tconfig
