"""Electrode layouts and brain-region partitions.

A partition groups a recording's channels into named regions; the
electrode-level encoders run one per region. Partitions are defined over
channel *labels* and resolved against the recording's channel order, so
the same partition file works for any compatible montage.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class PartitionError(ValueError):
    """Partition does not cover the montage disjointly."""


# 32-channel 10-20 layout in its conventional dataset order.
CHANNELS_32 = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7",
    "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz", "Pz",
    "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz",
    "C4", "T8", "CP6", "CP2", "P4", "P8", "PO4", "O2",
]

# Anatomically conventional nine-region grouping of the 32-channel layout.
DEFAULT_REGIONS_32 = [
    ("pre-frontal", ["Fp1", "Fp2", "AF3", "AF4"]),
    ("frontal", ["F7", "F3", "Fz", "F4", "F8"]),
    ("left-temporal", ["FC5", "T7", "CP5"]),
    ("right-temporal", ["FC6", "T8", "CP6"]),
    ("central", ["FC1", "FC2", "C3", "Cz", "C4"]),
    ("centro-parietal", ["CP1", "CP2", "Pz"]),
    ("left-parietal", ["P7", "P3"]),
    ("right-parietal", ["P4", "P8"]),
    ("occipital", ["PO3", "PO4", "O1", "Oz", "O2"]),
]

FRONTAL_REGIONS = ("pre-frontal", "frontal")


@dataclass(frozen=True)
class RegionPartition:
    """Ordered named regions, each an ordered list of channel indices."""

    names: tuple[str, ...]
    indices: tuple[tuple[int, ...], ...]
    n_channels: int

    def __post_init__(self):
        if len(self.names) != len(self.indices):
            raise PartitionError("region names and index groups differ in count")
        if len(self.names) < 2:
            raise PartitionError("a partition needs at least 2 regions")
        flat = [i for grp in self.indices for i in grp]
        if sorted(flat) != list(range(self.n_channels)):
            raise PartitionError(
                f"regions must cover channels 0..{self.n_channels - 1} disjointly, got {sorted(flat)}")

    @property
    def n_regions(self) -> int:
        return len(self.names)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.indices)

    @classmethod
    def from_labels(cls, regions: list[tuple[str, list[str]]],
                    channel_labels: list[str]) -> "RegionPartition":
        """Resolve label-based regions against a montage's channel order."""
        lookup = {lab: i for i, lab in enumerate(channel_labels)}
        if len(lookup) != len(channel_labels):
            raise PartitionError("montage has duplicate channel labels")
        names, groups = [], []
        for name, labels in regions:
            missing = [lab for lab in labels if lab not in lookup]
            if missing:
                raise PartitionError(f"region {name!r} names unknown channels: {missing}")
            names.append(name)
            groups.append(tuple(lookup[lab] for lab in labels))
        return cls(tuple(names), tuple(groups), len(channel_labels))

    @classmethod
    def default_32(cls) -> "RegionPartition":
        return cls.from_labels(DEFAULT_REGIONS_32, CHANNELS_32)

    @classmethod
    def contiguous(cls, n_channels: int, n_regions: int) -> "RegionPartition":
        """Even split into contiguous index blocks (reduced-size testing)."""
        if n_channels < n_regions:
            raise PartitionError(f"cannot split {n_channels} channels into {n_regions} regions")
        bounds = [round(r * n_channels / n_regions) for r in range(n_regions + 1)]
        groups = [tuple(range(bounds[r], bounds[r + 1])) for r in range(n_regions)]
        names = tuple(f"region-{r}" for r in range(n_regions))
        return cls(names, tuple(groups), n_channels)


def parse_partition_file(path: str | Path, channel_labels: list[str]) -> RegionPartition:
    """Read a partition config: one ``name: lab1, lab2, ...`` line per region.

    Blank lines and ``#`` comments are ignored.
    """
    regions: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise PartitionError(f"{path}:{lineno}: expected 'name: label, label, ...'")
        name, rest = line.split(":", 1)
        labels = [lab.strip() for lab in rest.split(",") if lab.strip()]
        if not labels:
            raise PartitionError(f"{path}:{lineno}: region {name.strip()!r} lists no channels")
        regions.append((name.strip(), labels))
    return RegionPartition.from_labels(regions, channel_labels)


def frontal_indices(channel_labels: list[str]) -> list[int]:
    """Indices of pre-frontal/frontal channels present in the montage."""
    frontal = {lab for name, labs in DEFAULT_REGIONS_32 if name in FRONTAL_REGIONS for lab in labs}
    return [i for i, lab in enumerate(channel_labels) if lab in frontal]
