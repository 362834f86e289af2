"""Feature selection by neural mutual information estimation.

A learned gate vector scales feature columns feeding a statistics network
trained on a variational mutual-information bound; regularization drives
irrelevant gates to zero and the surviving support is the selected set.
Includes synthetic benchmark generators with closed-form ground truth, a
nearest-neighbor MI baseline, and a k-NN regression evaluator.
"""

from .baseline_ksg import KsgConfig, ksg_filter, ksg_mi, ksg_scores
from .data import Dataset, dataset_hash, read_csv, write_csv
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DegenerateWeightsError,
    MinervaError,
    NumericError,
    ShapeError,
    TrainingError,
)
from .evaluate import EvalConfig, EvalResult, knn_r2
from .mine import MiEstimate, estimate_mi, make_batch, v_objective
from .ndgrad import Tensor, backward, clip_global_norm
from .rng import Rng
from .selector import (
    SelectionOutcome,
    SelectionResult,
    TrainConfig,
    classify_selection,
    select_features,
    snap_support,
)
from .statnet import NetworkSpec, StatNetParams, forward, init_params
from .synth import (
    ExpASpec,
    ExpBSpec,
    brute_force_mi,
    gen_experiment_a,
    gen_experiment_b,
    match_indicator_mi,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "DataError", "Dataset",
    "DegenerateWeightsError", "EvalConfig", "EvalResult", "ExpASpec",
    "ExpBSpec", "KsgConfig", "MiEstimate", "MinervaError", "NetworkSpec",
    "NumericError", "Rng", "SelectionOutcome", "SelectionResult", "ShapeError",
    "StatNetParams", "Tensor", "TrainConfig", "TrainingError", "backward",
    "brute_force_mi", "classify_selection", "clip_global_norm", "dataset_hash",
    "estimate_mi", "forward", "gen_experiment_a", "gen_experiment_b",
    "init_params", "knn_r2", "ksg_filter", "ksg_mi", "ksg_scores",
    "match_indicator_mi", "make_batch", "read_csv", "select_features",
    "snap_support", "v_objective", "write_csv",
]
