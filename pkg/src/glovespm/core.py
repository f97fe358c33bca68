"""Data model, TSV ingestion, stratified splitting and the synthetic generator."""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

GROUPS = ("POS", "ROT", "FINGER", "OTHER")
LEVELS = {"low": 0.15, "mid": 0.5, "high": 0.85}

_FILENAME_RE = re.compile(r"^(?P<label>.+)\.(?P<index>\d+)\.tsv$")


class DatasetError(ValueError):
    """Raised for malformed on-disk data or invalid dataset operations."""


@dataclass(frozen=True)
class ChannelSchema:
    names: tuple[str, ...]
    groups: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 1:
            raise DatasetError("schema must declare at least one channel")
        if len(self.names) != len(self.groups):
            raise DatasetError("schema names and groups differ in length")
        if any(not n for n in self.names):
            raise DatasetError("channel names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("channel names must be unique")
        for g in self.groups:
            if g not in GROUPS:
                raise DatasetError(f"unknown channel group {g!r}; expected one of {GROUPS}")

    @property
    def num_channels(self) -> int:
        return len(self.names)

    @classmethod
    def default(cls, num_channels: int) -> "ChannelSchema":
        return cls(tuple(f"ch{i}" for i in range(num_channels)), ("OTHER",) * num_channels)

    def channels_in_group(self, group: str) -> list[int]:
        return [i for i, g in enumerate(self.groups) if g == group]

    def select(self, keep: Sequence[int]) -> "ChannelSchema":
        return ChannelSchema(tuple(self.names[i] for i in keep), tuple(self.groups[i] for i in keep))


@dataclass(frozen=True)
class TimeSeriesInstance:
    label: str
    matrix: np.ndarray  # channels x frames
    source_id: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64, copy=True)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise DatasetError(f"{self.source_id or self.label}: matrix must be 2-D and non-empty, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise DatasetError(f"{self.source_id or self.label}: matrix contains non-finite values")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_channels(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_frames(self) -> int:
        return self.matrix.shape[1]

    def replace(self, matrix: np.ndarray) -> "TimeSeriesInstance":
        return TimeSeriesInstance(self.label, matrix, self.source_id)


@dataclass(frozen=True)
class Dataset:
    schema: ChannelSchema
    instances: tuple[TimeSeriesInstance, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        insts = tuple(self.instances)
        object.__setattr__(self, "instances", insts)
        vocab = tuple(sorted(set(self.labels) | {x.label for x in insts}))
        object.__setattr__(self, "labels", vocab)
        for x in insts:
            if x.num_channels != self.schema.num_channels:
                raise DatasetError(
                    f"{x.source_id or x.label}: {x.num_channels} channels, schema has {self.schema.num_channels}"
                )

    def __len__(self) -> int:
        return len(self.instances)

    def label_array(self) -> list[str]:
        return [x.label for x in self.instances]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.instances[i] for i in indices), self.labels)

    def map(self, fn) -> "Dataset":
        return Dataset(self.schema, tuple(fn(x) for x in self.instances), self.labels)

    def drop_channels(self, drop: Iterable[int]) -> "Dataset":
        drop = set(drop)
        keep = [i for i in range(self.schema.num_channels) if i not in drop]
        if not keep:
            raise DatasetError("cannot remove every channel")
        schema = self.schema.select(keep)
        return Dataset(schema, tuple(x.replace(x.matrix[keep]) for x in self.instances), self.labels)

    def filter_labels(self, labels: Iterable[str]) -> "Dataset":
        wanted = set(labels)
        return Dataset(self.schema, tuple(x for x in self.instances if x.label in wanted))


# --------------------------------------------------------------------------- io


def load_schema(path: str | os.PathLike) -> ChannelSchema:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"{path}: cannot read schema ({exc.strerror})") from exc
    names, groups = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 2:
            raise DatasetError(f"{path}:{lineno}: expected 'name<TAB>group', got {line!r}")
        name, group = parts[0].strip(), parts[1].strip()
        if group not in GROUPS:
            raise DatasetError(f"{path}:{lineno}: unknown group {group!r}")
        names.append(name)
        groups.append(group)
    try:
        return ChannelSchema(tuple(names), tuple(groups))
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


def _read_instance(path: Path, label: str, num_channels: int) -> TimeSeriesInstance:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"{path}: cannot read instance file ({exc})") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != num_channels:
            raise DatasetError(f"{path}:{lineno}: expected {num_channels} columns, got {len(cells)}")
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric cell in {line!r}") from None
        if not all(math.isfinite(v) for v in row):
            raise DatasetError(f"{path}:{lineno}: non-finite value")
        rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: file contains no frames")
    return TimeSeriesInstance(label, np.asarray(rows).T, source_id=path.name)


def load_dataset(root_path: str | os.PathLike, schema_path: str | os.PathLike) -> Dataset:
    """Read every ``<label>.<index>.tsv`` under ``root_path``.

    Files are visited in (label, numeric index) order, which is the order
    ``save_dataset`` writes, so a save/load round trip keeps instance order.
    """
    root = Path(root_path)
    schema = load_schema(schema_path)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    schema_file = Path(schema_path).resolve()
    keyed = []
    for p in root.iterdir():
        if not p.name.endswith(".tsv") or p.resolve() == schema_file:
            continue
        m = _FILENAME_RE.match(p.name)
        if m is None:
            raise DatasetError(f"{p}: filename does not follow <label>.<index>.tsv")
        keyed.append(((m.group("label"), int(m.group("index"))), p.name, m.group("label")))
    instances = [_read_instance(root / name, label, schema.num_channels) for _, name, label in sorted(keyed)]
    if not instances:
        raise DatasetError(f"{root}: no instances found")
    return Dataset(schema, tuple(instances))


def save_dataset(ds: Dataset, root_path: str | os.PathLike) -> None:
    """Write ``ds`` in the format ``load_dataset`` reads, plus ``schema.tsv``."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "schema.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for name, group in zip(ds.schema.names, ds.schema.groups):
            fh.write(f"{name}\t{group}\n")
    counters: dict[str, int] = {}
    for inst in ds.instances:
        idx = counters.get(inst.label, 0)
        counters[inst.label] = idx + 1
        with open(root / f"{inst.label}.{idx}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for frame in inst.matrix.T:
                fh.write("\t".join(format(float(v), ".17g") for v in frame) + "\n")


# ------------------------------------------------------------------- splitting


def split_train_test(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split; each class keeps ceil(fraction * n) instances for training.

    At least one instance per class is always held out.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    by_label: dict[str, list[int]] = {}
    for i, inst in enumerate(ds.instances):
        by_label.setdefault(inst.label, []).append(i)
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    for label in ds.labels:
        idx = by_label.get(label, [])
        if len(idx) < 2:
            raise DatasetError(f"class {label!r} has {len(idx)} instance(s); need at least 2 to split")
        n_train = math.ceil(train_fraction * len(idx) - 1e-9)
        n_train = min(max(n_train, 1), len(idx) - 1)
        perm = rng.permutation(len(idx))
        train_idx.extend(idx[j] for j in perm[:n_train])
    train_set = set(train_idx)
    test_idx = [i for i in range(len(ds)) if i not in train_set]
    return ds.subset(sorted(train_idx)), ds.subset(test_idx)


# ------------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class Plant:
    channel: int
    level: str
    start: tuple[int, int]  # inclusive range of start frames
    duration: tuple[int, int]  # inclusive range of lengths

    def __post_init__(self):
        if self.level not in LEVELS:
            raise DatasetError(f"plant level must be one of {sorted(LEVELS)}, got {self.level!r}")
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "duration", tuple(int(v) for v in self.duration))
        lo, hi = self.start
        dlo, dhi = self.duration
        if lo < 0 or hi < lo or dlo < 1 or dhi < dlo:
            raise DatasetError(f"bad plant ranges start={self.start} duration={self.duration}")


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int
    instances_per_class: int
    num_channels: int
    num_frames: int
    planted_patterns: tuple[tuple[Plant, ...], ...]
    noise_amplitude: float = 0.05
    seed: int = 0

    def __post_init__(self):
        plants = tuple(tuple(p if isinstance(p, Plant) else Plant(**p) for p in cls) for cls in self.planted_patterns)
        object.__setattr__(self, "planted_patterns", plants)
        if min(self.num_classes, self.instances_per_class, self.num_channels, self.num_frames) < 1:
            raise DatasetError("synthetic counts must all be >= 1")
        if self.noise_amplitude < 0:
            raise DatasetError("noise_amplitude must be >= 0")
        if len(plants) != self.num_classes:
            raise DatasetError(f"need planted_patterns for {self.num_classes} classes, got {len(plants)}")
        for c, cls in enumerate(plants):
            for p in cls:
                if not 0 <= p.channel < self.num_channels:
                    raise DatasetError(f"class {c}: plant channel {p.channel} out of range")
                if p.start[1] + p.duration[1] > self.num_frames:
                    raise DatasetError(f"class {c}: plant window may exceed {self.num_frames} frames")
            for a, b in zip(cls, cls[1:]):
                if a.start[1] > b.start[0]:
                    raise DatasetError(f"class {c}: planted start ranges must be ordered and non-interleaved")
        if len(set(plants)) != len(plants):
            raise DatasetError("planted pattern sets must differ between classes")

    def class_label(self, c: int) -> str:
        width = len(str(self.num_classes - 1))
        return f"class{c:0{width}d}"


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    instances = []
    for c, plants in enumerate(spec.planted_patterns):
        label = spec.class_label(c)
        for i in range(spec.instances_per_class):
            m = rng.uniform(0.0, 1.0, size=(spec.num_channels, spec.num_frames)) * spec.noise_amplitude
            for p in plants:
                start = int(rng.integers(p.start[0], p.start[1] + 1))
                dur = int(rng.integers(p.duration[0], p.duration[1] + 1))
                m[p.channel, start:start + dur] += LEVELS[p.level]
            instances.append(TimeSeriesInstance(label, m, source_id=f"synthetic:{label}:{i}"))
    labels = tuple(spec.class_label(c) for c in range(spec.num_classes))
    return Dataset(ChannelSchema.default(spec.num_channels), tuple(instances), labels)


def synthetic_spec_from_dict(raw: dict) -> SyntheticSpec:
    required = ("num_classes", "instances_per_class", "num_channels", "num_frames", "planted_patterns")
    for key in required:
        if key not in raw:
            raise DatasetError(f"synthetic spec is missing required key {key!r}")
    unknown = set(raw) - set(required) - {"noise_amplitude", "seed"}
    if unknown:
        raise DatasetError(f"synthetic spec has unknown key(s) {sorted(unknown)}")
    plants = []
    for c, cls in enumerate(raw["planted_patterns"]):
        row = []
        for p in cls:
            try:
                row.append(Plant(int(p["channel"]), str(p["level"]), tuple(p["start"]), tuple(p["duration"])))
            except (KeyError, TypeError) as exc:
                raise DatasetError(f"synthetic spec planted_patterns[{c}]: bad entry {p!r}") from exc
        plants.append(tuple(row))
    return SyntheticSpec(
        num_classes=int(raw["num_classes"]),
        instances_per_class=int(raw["instances_per_class"]),
        num_channels=int(raw["num_channels"]),
        num_frames=int(raw["num_frames"]),
        planted_patterns=tuple(plants),
        noise_amplitude=float(raw.get("noise_amplitude", 0.05)),
        seed=int(raw.get("seed", 0)),
    )


def synthetic_spec_to_dict(spec: SyntheticSpec) -> dict:
    return {
        "num_classes": spec.num_classes,
        "instances_per_class": spec.instances_per_class,
        "num_channels": spec.num_channels,
        "num_frames": spec.num_frames,
        "planted_patterns": [
            [{"channel": p.channel, "level": p.level, "start": list(p.start), "duration": list(p.duration)} for p in cls]
            for cls in spec.planted_patterns
        ],
        "noise_amplitude": spec.noise_amplitude,
        "seed": spec.seed,
    }
