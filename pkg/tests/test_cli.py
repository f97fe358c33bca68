import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from glovespm.cli import main
from glovespm.config import load_config
from glovespm.core import load_dataset, split_train_test
from glovespm.learn import LinearModelOvR, evaluate, predict
from glovespm.pipeline import flat_features

SYNTH = {
    "num_classes": 2,
    "instances_per_class": 12,
    "num_channels": 3,
    "num_frames": 24,
    "noise_amplitude": 0.05,
    "seed": 3,
    "planted_patterns": [
        [{"channel": 0, "level": "high", "start": [2, 3], "duration": [4, 5]},
         {"channel": 1, "level": "high", "start": [12, 13], "duration": [4, 5]}],
        [{"channel": 1, "level": "high", "start": [2, 3], "duration": [4, 5]},
         {"channel": 0, "level": "high", "start": [12, 13], "duration": [4, 5]}],
    ],
}


def base_config(mode="SPM"):
    return {
        "format_version": 1,
        "output_dir": "out",
        "dataset": {"synthetic": SYNTH},
        "preprocess": {"target_frames": 24, "use_derivative": False},
        "mining": {"alphabet_size": 3, "window": 12, "min_support": 6, "max_pattern_length": 2,
                   "max_patterns": 10, "use_derivative": False},
        "train": {"model": "HINGE", "l2_lambda": 0.001, "max_iters": 200},
        "split": {"train_fraction": 0.5, "seed": 1},
        "feature_mode": mode,
        "pca": {"k": 2},
        "ablation": {"groups": {"first": ["ch0"], "second": ["ch1"]}},
        "sweep": {"passes": 1, "candidates": {"window": [4, 12]}},
    }


def write_config(tmp_path, raw, name="exp.yaml") -> Path:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def read_outputs(out: Path) -> dict[str, bytes]:
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_full_pipeline_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, base_config())
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for sub in ("synth", "mine", "train", "eval", "ablate", "sweep", "pca"):
            assert main([sub, "--config", str(cfg), "--out", str(out)]) == 0, sub
        runs.append(read_outputs(out))
    assert runs[0].keys() == runs[1].keys()
    for name in runs[0]:
        assert runs[0][name] == runs[1][name], name
    assert {"patterns.tsv", "model.txt", "metrics.txt", "confusion.csv", "ablation.csv", "sweep.csv",
            "pca.csv", "data/manifest.json"} <= set(runs[0])


def test_reports_carry_audit_lines(tmp_path):
    cfg = write_config(tmp_path, base_config("FLAT"))
    out = tmp_path / "o"
    for sub in ("train", "eval", "pca"):
        assert main([sub, "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("metrics.txt", "model.txt", "pca.csv", "confusion.csv"):
        text = (out / name).read_text()
        assert "format_version" in text and "config_sha256" in text and "input_sha256" in text, name


def test_eval_matches_evaluate(tmp_path):
    cfg_path = write_config(tmp_path, base_config("FLAT"))
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert main(["eval", "--config", str(cfg_path), "--out", str(out)]) == 0
    fields = dict(line.split("=", 1) for line in (out / "metrics.txt").read_text().splitlines()
                  if "=" in line and not line.startswith("#"))
    cfg = load_config(cfg_path, out)
    ds = cfg.load()
    _, test = split_train_test(ds, cfg.settings.train_fraction, cfg.settings.split_seed)
    model = LinearModelOvR.from_text((out / "model.txt").read_text())
    X = flat_features(test, cfg.settings.preprocess)
    m = evaluate(predict(model, X), X.row_labels, ds.labels)
    assert float(fields["testing_error"]) == m.error
    assert float(fields["f1"]) == m.f1


def test_preprocess_emits_loadable_dataset(tmp_path):
    cfg = write_config(tmp_path, base_config())
    out = tmp_path / "o"
    assert main(["preprocess", "--config", str(cfg), "--out", str(out)]) == 0
    ds = load_dataset(out / "preprocessed", out / "preprocessed" / "schema.tsv")
    assert len(ds) == 24
    assert all(i.matrix.min() >= 0 and i.matrix.max() <= 1 for i in ds.instances)


def test_synth_then_path_dataset(tmp_path):
    cfg = write_config(tmp_path, base_config("FLAT"))
    out = tmp_path / "o"
    assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    raw = base_config("FLAT")
    raw["dataset"] = {"path": "o/data"}
    cfg2 = write_config(tmp_path, raw, "from_disk.yaml")
    assert main(["train", "--config", str(cfg2), "--out", str(tmp_path / "a")]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    model_a = (tmp_path / "a" / "model.txt").read_text().split("# config_sha256")[0]
    model_b = (tmp_path / "b" / "model.txt").read_text().split("# config_sha256")[0]
    # same data from disk or from the generator gives the same weights
    assert [l for l in model_a.splitlines() if not l.startswith("#")] == \
           [l for l in model_b.splitlines() if not l.startswith("#")]


def test_missing_min_support(tmp_path, capsys):
    raw = base_config()
    del raw["mining"]["min_support"]
    cfg = write_config(tmp_path, raw)
    assert main(["mine", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert "min_support" in capsys.readouterr().err


@pytest.mark.parametrize("mutate, needle", [
    (lambda r: r.update(format_version=2), "format_version"),
    (lambda r: r.update(bogus=1), "bogus"),
    (lambda r: r["mining"].update(alphabet_size=4), "alphabet_size"),
    (lambda r: r.update(dataset={"path": "does/not/exist"}), "does/not/exist"),
])
def test_invalid_config_names_the_problem(tmp_path, capsys, mutate, needle):
    raw = base_config()
    mutate(raw)
    cfg = write_config(tmp_path, raw)
    assert main(["mine", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
    assert needle in capsys.readouterr().err


def test_eval_without_model(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config())
    assert main(["eval", "--config", str(cfg), "--out", str(tmp_path / "empty")]) == 2
    assert "model.txt" in capsys.readouterr().err


def test_unknown_subcommand(tmp_path, capsys):
    cfg = write_config(tmp_path, base_config())
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", str(cfg)])
    assert exc.value.code != 0
    assert "frobnicate" in capsys.readouterr().err


def test_console_entry_without_numba(tmp_path):
    cfg = write_config(tmp_path, base_config())
    env = dict(os.environ, GLOVESPM_DISABLE_NUMBA="1")
    proc = subprocess.run([sys.executable, "-m", "glovespm.cli", "train", "--config", str(cfg),
                           "--out", str(tmp_path / "np")], env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "nb")]) == 0
    # the two matching backends are interchangeable, so the models agree byte for byte
    assert (tmp_path / "np" / "model.txt").read_bytes() == (tmp_path / "nb" / "model.txt").read_bytes()
    assert (tmp_path / "np" / "patterns.tsv").read_bytes() == (tmp_path / "nb" / "patterns.tsv").read_bytes()


def test_two_class_end_to_end_accuracy(tmp_path):
    raw = base_config()
    raw["dataset"]["synthetic"] = dict(SYNTH, instances_per_class=30)
    cfg = write_config(tmp_path, raw)
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["eval", "--config", str(cfg), "--out", str(out)]) == 0
    fields = dict(l.split("=", 1) for l in (out / "metrics.txt").read_text().splitlines() if "=" in l)
    assert 1 - float(fields["testing_error"]) >= 0.95
