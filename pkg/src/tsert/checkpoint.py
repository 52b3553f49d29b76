"""Model checkpoints: "TSCK" binary files.

Layout, all little-endian:

  magic ``TSCK`` | version u16 | config text length u32 | config UTF-8 text
  | tensor count u32 | per tensor: name length u16, name bytes, rank u8,
  dims u32 each, values f64

The config text fully rebuilds the ModelConfig (one ``key value`` pair
per line; ``region <name> <i,j,...>`` lines carry the partition), so a
checkpoint alone reconstructs the model.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig, TsertModel, build_variant
from .montage import RegionPartition

CHECKPOINT_VERSION = 1
_MAGIC = b"TSCK"

_INT_FIELDS = ("n_channels", "signal_len", "patches", "d_t", "d_e", "d_b",
               "l_t", "l_e", "l_b", "heads", "n_bands")


class CheckpointError(ValueError):
    """Checkpoint file malformed or inconsistent with the model."""


class CheckpointVersionError(CheckpointError):
    """Unsupported checkpoint format version."""


class CheckpointNameError(CheckpointError):
    """Stored parameter names do not match the rebuilt model."""


class CheckpointShapeError(CheckpointError):
    """A stored tensor's shape does not match its parameter."""


def config_to_text(config: ModelConfig) -> str:
    lines = [f"variant {config.variant}", f"target {config.target}"]
    lines += [f"{name} {getattr(config, name)}" for name in _INT_FIELDS]
    for name, idx in zip(config.partition.names, config.partition.indices):
        lines.append(f"region {name} {','.join(str(i) for i in idx)}")
    return "".join(line + "\n" for line in lines)


def config_from_text(text: str) -> ModelConfig:
    fields: dict = {}
    names, groups = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "region":
            name, _, idx = rest.partition(" ")
            names.append(name)
            groups.append(tuple(int(i) for i in idx.split(",")))
        elif key in ("variant", "target"):
            fields[key] = rest
        elif key in _INT_FIELDS:
            fields[key] = int(rest)
        else:
            raise CheckpointError(f"unknown config line {line!r}")
    partition = RegionPartition(tuple(names), tuple(groups), fields["n_channels"])
    return ModelConfig(partition=partition, **fields)


def save_checkpoint(model: TsertModel, path: str | Path) -> None:
    config_blob = config_to_text(model.config).encode("utf-8")
    named = list(model.named_params())
    chunks = [_MAGIC, struct.pack("<H", CHECKPOINT_VERSION),
              struct.pack("<I", len(config_blob)), config_blob,
              struct.pack("<I", len(named))]
    for name, t in named:
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", t.ndim))
        chunks.append(struct.pack(f"<{t.ndim}I", *t.shape) if t.ndim else b"")
        chunks.append(t.data.astype("<f8", copy=False).tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob, self.path, self.offset = blob, path, 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise CheckpointError(f"{self.path}: file cut short at byte {self.offset}")
        out = self.blob[self.offset:self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str | Path) -> TsertModel:
    """Rebuild the model a checkpoint describes and load its weights."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != _MAGIC:
        raise CheckpointError(f"{path}: not a TSCK checkpoint")
    (version,) = r.unpack("<H")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported version {version}")
    (config_len,) = r.unpack("<I")
    config = config_from_text(r.take(config_len).decode("utf-8"))
    model = build_variant(config, seed=0)

    (count,) = r.unpack("<I")
    stored: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        values = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape)
        stored[name] = values

    expected = dict(model.named_params())
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise CheckpointNameError(
            f"{path}: parameter names mismatch (missing {missing}, extra {extra})")
    for name, t in expected.items():
        if stored[name].shape != t.data.shape:
            raise CheckpointShapeError(
                f"{path}: {name} stored as {stored[name].shape}, model has {t.data.shape}")
        t.data = stored[name].astype(np.float64, copy=True)
    return model


def checkpoint_size(model: TsertModel) -> int:
    """Exact on-disk byte count for this model's checkpoint."""
    total = 4 + 2 + 4 + len(config_to_text(model.config).encode("utf-8")) + 4
    for name, t in model.named_params():
        total += 2 + len(name.encode("utf-8")) + 1 + 4 * t.ndim + 8 * t.size
    return total
