"""Multivariate time-series classification with temporal sequential pattern mining."""
__version__ = "0.1.0"

from ._accel import USE_NUMBA, backend_name
from .core import (
    ChannelSchema, Dataset, DatasetError, Plant, SyntheticSpec, TimeSeriesInstance,
    generate_synthetic, load_dataset, save_dataset, split_train_test,
)
from .discretize import Alphabet, DiscretizedInstance, Run, collapse_runs, discretize_channel, discretize_instance
from .learn import LinearModelOvR, Metrics, TrainConfig, evaluate, predict, train_logistic_ovr, train_svm_ovr
from .miner import (
    BinaryFeatures, MiningConfig, Pattern, RankedPatternSet, Relation, State, binarize, chi_square_score,
    generate_candidates, match_pattern, mine_frequent, select_top, support_counts,
)
from .pipeline import FeatureMode, PipelineSettings, concat_features, run_pipeline
from .preprocess import (
    FlatMatrix, PreprocessConfig, differentiate, flatten, resample_fourier, spatial_scale, temporal_scale,
)
