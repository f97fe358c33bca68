"""End-to-end glue: preprocessing, featurization, training and evaluation."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, split_train_test
from .discretize import discretize_dataset
from .learn import LinearModelOvR, Metrics, ModelKind, TrainConfig, evaluate, predict, train
from .miner import BinaryFeatures, MiningConfig, RankedPatternSet, binarize, mine_and_rank
from .preprocess import FlatMatrix, PreprocessConfig, flatten, preprocess_dataset


class FeatureMode(str, enum.Enum):
    FLAT = "FLAT"
    SPM = "SPM"
    CONCAT = "CONCAT"


@dataclass(frozen=True)
class PipelineSettings:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model_kind: ModelKind = ModelKind.HINGE
    feature_mode: FeatureMode = FeatureMode.FLAT
    train_fraction: float = 0.7
    split_seed: int = 0

    def with_mining(self, **changes) -> "PipelineSettings":
        return replace(self, mining=replace(self.mining, **changes))


@dataclass(frozen=True)
class PipelineResult:
    model: LinearModelOvR
    train_metrics: Metrics
    test_metrics: Metrics
    ranked: RankedPatternSet | None


def concat_features(flat: FlatMatrix, binary: BinaryFeatures) -> FlatMatrix:
    if flat.values.shape[0] != binary.values.shape[0] or tuple(flat.row_labels) != tuple(binary.row_labels):
        raise ValueError("flat and binary features must have the same rows in the same order")
    values = np.hstack([flat.values, binary.values.astype(np.float64)])
    return FlatMatrix(values, tuple(flat.row_labels), flat.num_channels)


def flat_features(ds: Dataset, cfg: PreprocessConfig) -> FlatMatrix:
    return flatten(preprocess_dataset(ds, cfg))


def spm_features(train_ds: Dataset, test_ds: Dataset, settings: PipelineSettings, backend=None):
    """Mine on the training half, then binarize both halves against the ranked patterns."""
    mcfg = settings.mining
    pcfg = replace(settings.preprocess, use_derivative=mcfg.use_derivative)
    alphabet = mcfg.alphabet
    train_d = discretize_dataset(preprocess_dataset(train_ds, pcfg).instances, alphabet)
    test_d = discretize_dataset(preprocess_dataset(test_ds, pcfg).instances, alphabet)
    ranked = mine_and_rank(train_d, mcfg, backend)
    return binarize(train_d, ranked, backend), binarize(test_d, ranked, backend), ranked


def build_features(train_ds: Dataset, test_ds: Dataset, settings: PipelineSettings, backend=None):
    mode = FeatureMode(settings.feature_mode)
    ranked = None
    if mode is not FeatureMode.SPM:
        Xtr = flat_features(train_ds, settings.preprocess)
        Xte = flat_features(test_ds, settings.preprocess)
    if mode is not FeatureMode.FLAT:
        Btr, Bte, ranked = spm_features(train_ds, test_ds, settings, backend)
        if mode is FeatureMode.SPM:
            Xtr, Xte = Btr, Bte
        else:
            Xtr, Xte = concat_features(Xtr, Btr), concat_features(Xte, Bte)
    return Xtr, Xte, ranked


def run_split(train_ds: Dataset, test_ds: Dataset, settings: PipelineSettings, backend=None) -> PipelineResult:
    Xtr, Xte, ranked = build_features(train_ds, test_ds, settings, backend)
    model = train(settings.model_kind, Xtr, settings.train)
    vocab = train_ds.labels
    train_m = evaluate(predict(model, Xtr), Xtr.row_labels, vocab)
    test_m = evaluate(predict(model, Xte), Xte.row_labels, vocab)
    return PipelineResult(model, train_m, test_m, ranked)


def run_pipeline(ds: Dataset, settings: PipelineSettings, backend=None) -> PipelineResult:
    train_ds, test_ds = split_train_test(ds, settings.train_fraction, settings.split_seed)
    return run_split(train_ds, test_ds, settings, backend)
