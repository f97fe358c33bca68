import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glovespm.analysis import (
    AblationSpec, SweepSpec, ablate, ablation_csv, pca_csv, pca_project, sweep_csv, tune_coordinate_ascent,
)
from glovespm.core import ChannelSchema, Dataset, DatasetError, Plant, SyntheticSpec, generate_synthetic
from glovespm.miner import BinaryFeatures
from glovespm.pipeline import PipelineSettings, concat_features
from glovespm.preprocess import FlatMatrix, PreprocessConfig


# ---------------------------------------------------------------------- PCA

def test_pca_rank_one_line():
    t = np.linspace(-2, 2, 9)
    X = np.outer(t, [3.0, 4.0]) + [1.0, -1.0]
    r = pca_project(X, k=1)
    np.testing.assert_allclose(np.abs(r.components[0]), [0.6, 0.8], atol=1e-9)
    np.testing.assert_allclose(np.abs(r.projected[:, 0]), np.abs(5 * t), atol=1e-9)


def test_pca_diagonal_variances():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((400, 3))
    Z = (Z - Z.mean(0)) / Z.std(0, ddof=1)
    Z = np.linalg.qr(Z)[0] * np.sqrt(399)  # exactly uncorrelated, unit variance columns
    X = Z * [2.0, 1.0, 0.0]
    r = pca_project(X, k=2)
    np.testing.assert_allclose(r.explained_variance, [4.0, 1.0], atol=1e-8)
    np.testing.assert_allclose(np.abs(r.components), [[1, 0, 0], [0, 1, 0]], atol=1e-8)


def eigh_oracle(X, k):
    C = np.cov(X, rowvar=False)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1][:k]
    return vals[order], vecs[:, order].T


def check_pca(X, k):
    r = pca_project(X, k=k)
    vals, vecs = eigh_oracle(X, k)
    np.testing.assert_allclose(r.explained_variance, vals, atol=1e-6)
    for got, want in zip(r.components, vecs):
        assert min(np.abs(got - want).max(), np.abs(got + want).max()) <= 1e-6
    assert np.abs(r.components @ r.components.T - np.eye(k)).max() <= 1e-8
    return r


def test_pca_matches_dense_eigensolver():
    rng = np.random.default_rng(1)
    for _ in range(5):
        # scale columns so the spectrum has clear gaps
        check_pca(rng.standard_normal((20, 5)) * [5, 3, 2, 1, 0.5], 3)


def test_pca_sign_convention_and_determinism():
    X = np.random.default_rng(2).standard_normal((20, 5))
    a, b = pca_project(X), pca_project(X)
    assert a.components.tobytes() == b.components.tobytes()
    for c in a.components:
        assert c[np.argmax(np.abs(c))] > 0


def test_pca_reconstruction_error_non_increasing():
    X = np.random.default_rng(3).standard_normal((30, 6)) * [4, 3, 2, 1.5, 1, 0.5]
    errs = []
    for k in range(1, 7):
        r = pca_project(X, k=k)
        rec = r.projected @ r.components + r.mean
        errs.append(np.sum((X - rec) ** 2))
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-12


def test_pca_errors():
    with pytest.raises(ValueError):
        pca_project(np.zeros((5, 3)), k=1)
    with pytest.raises(ValueError):
        pca_project(np.ones((5, 3)), k=4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_pca_orthonormal_property(seed):
    X = np.random.default_rng(seed).standard_normal((12, 4)) * [4, 2, 1, 0.25]
    r = pca_project(X, k=3)
    assert np.abs(r.components @ r.components.T - np.eye(3)).max() <= 1e-8


def test_pca_csv_header():
    r = pca_project(np.random.default_rng(4).standard_normal((4, 3)), k=3)
    text = pca_csv(r, ["a", "b", "a", "b"])
    assert text.splitlines()[0] == "x,y,z,label"
    assert len(text.splitlines()) == 5


# ----------------------------------------------------------------- ablation

def ch0_signal_dataset(extra_constant=False, seed=0):
    """Two classes that differ only in where channel 0 plateaus; other channels are noise."""
    a = (Plant(0, "high", (3, 5), (5, 6)),)
    b = (Plant(0, "high", (18, 20), (5, 6)),)
    ds = generate_synthetic(SyntheticSpec(2, 20, 3, 30, (a, b), 0.1, seed))
    if not extra_constant:
        return ds
    schema = ChannelSchema(ds.schema.names + ("const",), ds.schema.groups + ("OTHER",))
    insts = tuple(i.replace(np.vstack([i.matrix, np.full((1, i.num_frames), 0.3)])) for i in ds.instances)
    return Dataset(schema, insts)


SETTINGS = PipelineSettings(preprocess=PreprocessConfig(30))


def test_ablation_signal_channel_matters():
    ds = ch0_signal_dataset()
    names = ds.schema.names
    rows = ablate(ds, AblationSpec.from_mapping({"sig": [names[0]], "n1": [names[1]], "n2": [names[2]]}), SETTINGS)
    err = dict(rows)
    assert err["None"] == 0.0
    assert err["sig"] >= 0.3
    assert err["n1"] == 0.0 and err["n2"] == 0.0
    # cumulative rows stop before every channel is gone
    assert [r[0] for r in rows] == ["None", "sig", "n1", "n2", "sig, n1"]


def test_ablation_inert_channel_changes_nothing():
    ds = ch0_signal_dataset(extra_constant=True)
    rows = dict(ablate(ds, AblationSpec.from_mapping({"c": ["const"]}), SETTINGS))
    assert rows["c"] == rows["None"]


def test_ablation_unknown_group():
    ds = ch0_signal_dataset()
    with pytest.raises(DatasetError, match="nope"):
        ablate(ds, AblationSpec.from_mapping({"x": ["nope"]}), SETTINGS)


def test_ablation_csv():
    assert ablation_csv([("None", 0.1), ("A, B", 0.25)]) == 'removed_groups,test_error\n"None",0.100000\n"A, B",0.250000\n'


# ------------------------------------------------------------------- sweep

def test_sweep_single_pass_trace_length():
    spec = SweepSpec((("window", (1, 2, 3)), ("min_support", (5, 10))), passes=1)
    best, trace = tune_coordinate_ascent(None, spec, objective=lambda c: 0.0)
    assert len(trace) == 5
    assert best == {"window": 1, "min_support": 5}  # ties keep the earlier candidate


def separable_objective(c):
    return {1: 0.1, 2: 0.5, 3: 0.2}[c["window"]] + {5: 0.0, 10: 0.3, 20: 0.1}[c["min_support"]]


def test_sweep_separable_finds_grid_argmax():
    spec = SweepSpec((("window", (1, 2, 3)), ("min_support", (5, 10, 20))), passes=2)
    best, trace = tune_coordinate_ascent(None, spec, objective=separable_objective)
    grid = max(itertools.product((1, 2, 3), (5, 10, 20)),
               key=lambda wm: separable_objective({"window": wm[0], "min_support": wm[1]}))
    assert (best["window"], best["min_support"]) == grid


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_sweep_ascent_property(seed):
    rng = np.random.default_rng(seed)
    table = rng.random((3, 3, 2))
    spec = SweepSpec((("window", (0, 1, 2)), ("min_support", (0, 1, 2)), ("max_pattern_length", (0, 1))), passes=3)

    def obj(c):
        return table[c["window"], c["min_support"], c["max_pattern_length"]]

    best, trace = tune_coordinate_ascent(None, spec, objective=obj)
    start = obj({"window": 0, "min_support": 0, "max_pattern_length": 0})
    assert obj(best) >= start
    assert obj(best) == max(acc for _, acc in trace)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec.from_mapping({"learning_rate": [0.1]})
    with pytest.raises(ValueError):
        SweepSpec((("window", ()),))


def test_sweep_csv():
    text = sweep_csv([({"window": 2, "min_support": 5}, 0.5)])
    assert text == "window,min_support,accuracy\n2,5,0.500000\n"


def test_sweep_on_data_is_deterministic():
    ds = ch0_signal_dataset()
    spec = SweepSpec.from_mapping({"window": [2, 6], "max_patterns": [5, 10]}, passes=1)
    s = SETTINGS.with_mining(min_support=10)
    a = tune_coordinate_ascent(ds, spec, s)
    b = tune_coordinate_ascent(ds, spec, s)
    assert a == b
    assert len(a[1]) == 4


# ------------------------------------------------------------ concatenation

def test_concat_layout():
    flat = FlatMatrix(np.arange(6, dtype=float).reshape(2, 3), ("a", "b"), 1)
    binary = BinaryFeatures(np.array([[1, 0], [0, 1]], dtype=np.uint8), ("a", "b"), ())
    out = concat_features(flat, binary)
    np.testing.assert_array_equal(out.values, [[0, 1, 2, 1, 0], [3, 4, 5, 0, 1]])
    assert out.row_labels == ("a", "b")
    with pytest.raises(ValueError):
        concat_features(flat, BinaryFeatures(binary.values, ("b", "a"), ()))


def test_concat_with_no_patterns_is_flat():
    flat = FlatMatrix(np.ones((3, 4)), ("a", "b", "c"), 2)
    out = concat_features(flat, BinaryFeatures(np.zeros((3, 0), dtype=np.uint8), ("a", "b", "c"), ()))
    np.testing.assert_array_equal(out.values, flat.values)


def test_concat_indicator_column_does_not_hurt():
    from glovespm.learn import TrainConfig, evaluate, predict, train_svm_ovr
    rng = np.random.default_rng(9)
    labels = tuple("ab"[i % 2] for i in range(40))
    flat = FlatMatrix(rng.random((40, 6)), labels, 1)
    ind = BinaryFeatures(np.array([[lab == "a"] for lab in labels], dtype=np.uint8), labels, ())
    errs = []
    for X in (flat, concat_features(flat, ind)):
        m = train_svm_ovr(X, TrainConfig(l2_lambda=1e-4, max_iters=2000))
        errs.append(evaluate(predict(m, X), labels, "ab").error)
    assert errs[1] <= errs[0]
    assert errs[1] == 0.0
