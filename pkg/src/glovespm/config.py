"""Experiment configuration: YAML file -> validated settings.

Grammar (``format_version: 1``)::

    format_version: 1
    output_dir: out                # optional, --out overrides
    dataset:                       # exactly one source
      path: data/                  # directory of <label>.<index>.tsv files
      schema: data/schema.tsv      # defaults to <path>/schema.tsv
      # synthetic: {...}           # inline synthetic spec (core.SyntheticSpec keys)
      # synthetic_file: spec.yaml  # or a YAML file holding one
      labels: [a, b]               # optional subset of classes
    preprocess: {target_frames: 57, use_derivative: false}
    mining:                        # every key required
      alphabet_size: 3
      window: 2
      min_support: 20
      max_pattern_length: 2
      max_patterns: 50
      use_derivative: false
    train: {model: HINGE, l2_lambda: 0.001, max_iters: 500, tolerance: 1.0e-6, learning_rate: 0.1, seed: 0}
    split: {train_fraction: 0.7, seed: 0}
    feature_mode: FLAT             # FLAT | SPM | CONCAT
    pca: {k: 3}
    ablation: {groups: {POS: [POS], ROT: [ROT]}}
    sweep: {passes: 2, seed: 0, candidates: {window: [2, 5], min_support: [10, 20]}}
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import yaml

from .analysis import AblationSpec, SweepSpec
from .core import Dataset, SyntheticSpec, generate_synthetic, load_dataset, synthetic_spec_from_dict
from .learn import ModelKind, TrainConfig
from .miner import MiningConfig
from .pipeline import FeatureMode, PipelineSettings
from .preprocess import PreprocessConfig

FORMAT_VERSION = 1

MINING_KEYS = ("alphabet_size", "window", "min_support", "max_pattern_length", "max_patterns", "use_derivative")
TOP_KEYS = {"format_version", "output_dir", "dataset", "preprocess", "mining", "train", "split",
            "feature_mode", "pca", "ablation", "sweep"}


class ConfigError(ValueError):
    pass


def _section(raw: dict, key: str, allowed: set[str]) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    unknown = set(sec) - allowed
    if unknown:
        raise ConfigError(f"'{key}' has unknown key(s): {', '.join(sorted(unknown))}")
    return sec


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    base_dir: Path
    settings: PipelineSettings
    output_dir: Path
    synthetic: SyntheticSpec | None
    dataset_path: Path | None
    schema_path: Path | None
    label_subset: tuple[str, ...] | None
    pca_k: int
    ablation: AblationSpec | None
    sweep: SweepSpec | None

    def resolved(self) -> dict:
        """Fully resolved configuration, defaults filled in, for embedding in reports."""
        s = self.settings
        out: dict[str, Any] = {"format_version": FORMAT_VERSION}
        ds: dict[str, Any] = {}
        if self.synthetic is not None:
            from .core import synthetic_spec_to_dict

            ds["synthetic"] = synthetic_spec_to_dict(self.synthetic)
        else:
            ds["path"] = str(self.dataset_path)
            ds["schema"] = str(self.schema_path)
        if self.label_subset is not None:
            ds["labels"] = list(self.label_subset)
        out["dataset"] = ds
        out["preprocess"] = asdict(s.preprocess)
        out["mining"] = asdict(s.mining)
        out["train"] = dict(model=s.model_kind.value, **asdict(s.train))
        out["split"] = {"train_fraction": s.train_fraction, "seed": s.split_seed}
        out["feature_mode"] = s.feature_mode.value
        out["pca"] = {"k": self.pca_k}
        if self.ablation is not None:
            out["ablation"] = {"groups": {n: list(sel) for n, sel in self.ablation.groups}}
        if self.sweep is not None:
            out["sweep"] = {"passes": self.sweep.passes, "seed": self.sweep.seed,
                            "candidates": {n: list(v) for n, v in self.sweep.candidates}}
        return out

    def resolved_json(self) -> str:
        return json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_json().encode()).hexdigest()

    def load(self) -> Dataset:
        if self.synthetic is not None:
            ds = generate_synthetic(self.synthetic)
        else:
            ds = load_dataset(self.dataset_path, self.schema_path)
        if self.label_subset is not None:
            missing = set(self.label_subset) - set(ds.labels)
            if missing:
                raise ConfigError(f"dataset.labels names unknown class(es): {', '.join(sorted(missing))}")
            ds = ds.filter_labels(self.label_subset)
        return ds


def _num(sec: dict, key: str, typ, where: str, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"missing required key '{where}.{key}'")
        return default
    val = sec[key]
    try:
        if typ is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if typ is int and (isinstance(val, bool) or float(val) != int(val)):
            raise TypeError
        return typ(val)
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}.{key}' must be {typ.__name__}, got {val!r}") from None


def parse_config(raw: dict, base_dir: str | os.PathLike = ".", out_override: str | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a YAML mapping")
    base = Path(base_dir)
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    if "format_version" not in raw:
        raise ConfigError("missing required key 'format_version'")
    if raw["format_version"] != FORMAT_VERSION:
        raise ConfigError(f"unsupported format_version {raw['format_version']!r}; expected {FORMAT_VERSION}")

    # dataset
    if "dataset" not in raw:
        raise ConfigError("missing required key 'dataset'")
    ds = _section(raw, "dataset", {"path", "schema", "synthetic", "synthetic_file", "labels"})
    sources = [k for k in ("path", "synthetic", "synthetic_file") if k in ds]
    if len(sources) != 1:
        raise ConfigError("'dataset' needs exactly one of 'path', 'synthetic', 'synthetic_file'")
    synthetic = dataset_path = schema_path = None
    try:
        if "synthetic" in ds:
            synthetic = synthetic_spec_from_dict(ds["synthetic"])
        elif "synthetic_file" in ds:
            spec_path = base / ds["synthetic_file"]
            try:
                spec_raw = yaml.safe_load(spec_path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise ConfigError(f"dataset.synthetic_file: cannot read {spec_path} ({exc.strerror})") from exc
            synthetic = synthetic_spec_from_dict(spec_raw)
        else:
            dataset_path = base / ds["path"]
            schema_path = base / ds["schema"] if "schema" in ds else dataset_path / "schema.tsv"
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"dataset: {exc}") from exc
    labels = tuple(str(x) for x in ds["labels"]) if "labels" in ds else None

    try:
        pp = _section(raw, "preprocess", {"target_frames", "use_derivative"})
        preprocess = PreprocessConfig(
            target_frames=_num(pp, "target_frames", int, "preprocess", 57),
            use_derivative=_num(pp, "use_derivative", bool, "preprocess", False),
        )
        if "mining" not in raw:
            raise ConfigError("missing required key 'mining'")
        mn = _section(raw, "mining", set(MINING_KEYS))
        mining = MiningConfig(
            **{k: _num(mn, k, bool if k == "use_derivative" else int, "mining", required=True) for k in MINING_KEYS}
        )
        tr = _section(raw, "train", {"model", "l2_lambda", "max_iters", "tolerance", "learning_rate", "seed"})
        model = str(tr.get("model", "HINGE")).upper()
        if model not in ModelKind.__members__:
            raise ConfigError(f"'train.model' must be HINGE or LOGISTIC, got {tr.get('model')!r}")
        train = TrainConfig(
            l2_lambda=_num(tr, "l2_lambda", float, "train", 1e-3),
            max_iters=_num(tr, "max_iters", int, "train", 500),
            tolerance=_num(tr, "tolerance", float, "train", 1e-6),
            learning_rate=_num(tr, "learning_rate", float, "train", 0.1),
            seed=_num(tr, "seed", int, "train", 0),
        )
        sp = _section(raw, "split", {"train_fraction", "seed"})
        frac = _num(sp, "train_fraction", float, "split", 0.7)
        if not 0.0 < frac < 1.0:
            raise ConfigError(f"'split.train_fraction' must lie in (0, 1), got {frac}")
        mode = str(raw.get("feature_mode", "FLAT")).upper()
        if mode not in FeatureMode.__members__:
            raise ConfigError(f"'feature_mode' must be FLAT, SPM or CONCAT, got {raw.get('feature_mode')!r}")
        settings = PipelineSettings(preprocess, mining, train, ModelKind(model), FeatureMode(mode), frac,
                                    _num(sp, "seed", int, "split", 0))
        pca = _section(raw, "pca", {"k"})
        pca_k = _num(pca, "k", int, "pca", 3)
        ablation = None
        if "ablation" in raw:
            ab = _section(raw, "ablation", {"groups"})
            if not ab.get("groups"):
                raise ConfigError("missing required key 'ablation.groups'")
            ablation = AblationSpec.from_mapping(ab["groups"])
        sweep = None
        if "sweep" in raw:
            sw = _section(raw, "sweep", {"passes", "seed", "candidates"})
            if not sw.get("candidates"):
                raise ConfigError("missing required key 'sweep.candidates'")
            sweep = SweepSpec.from_mapping(sw["candidates"], _num(sw, "passes", int, "sweep", 2),
                                           _num(sw, "seed", int, "sweep", 0))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    out = Path(out_override) if out_override else base / str(raw.get("output_dir", "out"))
    return ExperimentConfig(raw, base, settings, out, synthetic, dataset_path, schema_path, labels,
                            pca_k, ablation, sweep)


def load_config(path: str | os.PathLike, out_override: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path} ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    return parse_config(raw, path.parent, out_override)


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    for name, group in zip(ds.schema.names, ds.schema.groups):
        h.update(f"{name}\t{group}\n".encode())
    for inst in ds.instances:
        h.update(inst.label.encode() + b"\0")
        h.update(str(inst.matrix.shape).encode())
        h.update(inst.matrix.astype("<f8").tobytes())
    return h.hexdigest()
