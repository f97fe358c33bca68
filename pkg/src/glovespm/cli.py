"""Command line entry point: ``glovespm <subcommand> --config exp.yaml [--out DIR]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import ablate, ablation_csv, pca_csv, pca_project, sweep_csv, tune_coordinate_ascent
from .config import FORMAT_VERSION, ConfigError, ExperimentConfig, dataset_hash, load_config
from .core import DatasetError, save_dataset, split_train_test
from .discretize import discretize_dataset
from .learn import LinearModelOvR, evaluate, predict, train
from .miner import RankedPatternSet, binarize, mine_and_rank
from .pipeline import FeatureMode, build_features, concat_features, flat_features
from .preprocess import preprocess_dataset

log = logging.getLogger("glovespm")

SUBCOMMANDS = ("synth", "preprocess", "mine", "train", "eval", "ablate", "sweep", "pca")


class CLIError(Exception):
    pass


def _audit(cfg: ExperimentConfig, input_hash: str) -> list[str]:
    return [
        f"config_version={FORMAT_VERSION}",
        f"config_sha256={cfg.config_hash()}",
        f"input_sha256={input_hash}",
        f"config={cfg.resolved_json()}",
    ]


def _commented(cfg, input_hash) -> str:
    return "".join(f"# {line}\n" for line in _audit(cfg, input_hash))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _manifest(cfg, input_hash, files) -> str:
    body = {
        "config": cfg.resolved(),
        "config_sha256": cfg.config_hash(),
        "config_version": FORMAT_VERSION,
        "input_sha256": input_hash,
        "files": sorted(files),
    }
    return json.dumps(body, sort_keys=True, indent=2) + "\n"


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ----------------------------------------------------------------- commands


def cmd_synth(cfg: ExperimentConfig) -> None:
    if cfg.synthetic is None:
        raise CLIError("synth needs 'dataset.synthetic' or 'dataset.synthetic_file' in the config")
    ds = cfg.load()
    root = cfg.output_dir / "data"
    save_dataset(ds, root)
    files = [p.name for p in root.glob("*.tsv")]
    _write(root / "manifest.json", _manifest(cfg, dataset_hash(ds), files))


def cmd_preprocess(cfg: ExperimentConfig) -> None:
    ds = cfg.load()
    out = preprocess_dataset(ds, cfg.settings.preprocess)
    root = cfg.output_dir / "preprocessed"
    save_dataset(out, root)
    files = [p.name for p in root.glob("*.tsv")]
    _write(root / "manifest.json", _manifest(cfg, dataset_hash(ds), files))


def _mine(cfg: ExperimentConfig, train_ds) -> RankedPatternSet:
    s = cfg.settings
    pcfg = replace(s.preprocess, use_derivative=s.mining.use_derivative)
    disc = discretize_dataset(preprocess_dataset(train_ds, pcfg).instances, s.mining.alphabet)
    return mine_and_rank(disc, s.mining)


def _patterns_text(cfg, ranked, input_hash) -> str:
    text = ranked.to_text()
    head, _, rest = text.partition("\n")
    return head + "\n" + _commented(cfg, input_hash) + rest


def cmd_mine(cfg: ExperimentConfig) -> None:
    ds = cfg.load()
    train_ds, _ = split_train_test(ds, cfg.settings.train_fraction, cfg.settings.split_seed)
    ranked = _mine(cfg, train_ds)
    _write(cfg.output_dir / "patterns.tsv", _patterns_text(cfg, ranked, dataset_hash(ds)))


def cmd_train(cfg: ExperimentConfig) -> None:
    ds = cfg.load()
    s = cfg.settings
    train_ds, test_ds = split_train_test(ds, s.train_fraction, s.split_seed)
    Xtr, _, ranked = build_features(train_ds, test_ds, s)
    model = train(s.model_kind, Xtr, s.train)
    h = dataset_hash(ds)
    if ranked is not None:
        _write(cfg.output_dir / "patterns.tsv", _patterns_text(cfg, ranked, h))
    _write(cfg.output_dir / "model.txt", model.to_text() + _commented(cfg, h))


def _features_for(cfg: ExperimentConfig, split, ranked):
    s = cfg.settings
    mode = s.feature_mode
    if mode is FeatureMode.FLAT:
        return flat_features(split, s.preprocess)
    pcfg = replace(s.preprocess, use_derivative=s.mining.use_derivative)
    disc = discretize_dataset(preprocess_dataset(split, pcfg).instances, s.mining.alphabet)
    B = binarize(disc, ranked)
    if mode is FeatureMode.SPM:
        return B
    return concat_features(flat_features(split, s.preprocess), B)


def cmd_eval(cfg: ExperimentConfig) -> None:
    model_path = cfg.output_dir / "model.txt"
    if not model_path.exists():
        raise CLIError(f"missing input {model_path}; run 'train' first")
    model = LinearModelOvR.from_text(model_path.read_text(encoding="utf-8"))
    ranked = None
    if cfg.settings.feature_mode is not FeatureMode.FLAT:
        pat_path = cfg.output_dir / "patterns.tsv"
        if not pat_path.exists():
            raise CLIError(f"missing input {pat_path}; run 'train' first")
        ranked = RankedPatternSet.from_text(pat_path.read_text(encoding="utf-8"))
    ds = cfg.load()
    s = cfg.settings
    train_ds, test_ds = split_train_test(ds, s.train_fraction, s.split_seed)
    Xtr = _features_for(cfg, train_ds, ranked)
    Xte = _features_for(cfg, test_ds, ranked)
    vocab = train_ds.labels
    tr = evaluate(predict(model, Xtr), Xtr.row_labels, vocab)
    te = evaluate(predict(model, Xte), Xte.row_labels, vocab)
    input_hash = hashlib.sha256(
        (dataset_hash(ds) + _file_hash(model_path) + (ranked.to_text() if ranked else "")).encode()
    ).hexdigest()
    lines = _audit(cfg, input_hash)
    lines += [
        f"model={model.kind.value}",
        f"feature_mode={s.feature_mode.value}",
        f"precision={te.precision!r}",
        f"recall={te.recall!r}",
        f"f1={te.f1!r}",
        f"training_error={tr.error!r}",
        f"testing_error={te.error!r}",
        "confusion=confusion.csv",
    ]
    _write(cfg.output_dir / "metrics.txt", "\n".join(lines) + "\n")
    _write(cfg.output_dir / "confusion.csv", _commented(cfg, input_hash) + te.confusion_csv())


def cmd_ablate(cfg: ExperimentConfig) -> None:
    if cfg.ablation is None:
        raise CLIError("ablate needs an 'ablation' section in the config")
    ds = cfg.load()
    rows = ablate(ds, cfg.ablation, cfg.settings)
    _write(cfg.output_dir / "ablation.csv", _commented(cfg, dataset_hash(ds)) + ablation_csv(rows))


def cmd_sweep(cfg: ExperimentConfig) -> None:
    if cfg.sweep is None:
        raise CLIError("sweep needs a 'sweep' section in the config")
    ds = cfg.load()
    best, trace = tune_coordinate_ascent(ds, cfg.sweep, cfg.settings)
    best_line = "# best " + " ".join(f"{k}={v}" for k, v in best.items()) + "\n"
    _write(cfg.output_dir / "sweep.csv", _commented(cfg, dataset_hash(ds)) + best_line + sweep_csv(trace))


def cmd_pca(cfg: ExperimentConfig) -> None:
    ds = cfg.load()
    X = flat_features(ds, cfg.settings.preprocess)
    res = pca_project(X, cfg.pca_k)
    _write(cfg.output_dir / "pca.csv", _commented(cfg, dataset_hash(ds)) + pca_csv(res, X.row_labels))


COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "mine": cmd_mine,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "sweep": cmd_sweep,
    "pca": cmd_pca,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glovespm", description="Sequential-pattern gesture classification")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment YAML file")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out)
        COMMANDS[args.subcommand](cfg)
    except (ConfigError, DatasetError, CLIError) as exc:
        print(f"glovespm {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"glovespm {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
