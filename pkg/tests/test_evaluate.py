import numpy as np
import pytest

from minerva.data import CAT, FLOAT, Dataset
from minerva.errors import ConfigError
from minerva.evaluate import EvalConfig, knn_r2
from minerva.rng import Rng


def linear_dataset(n=2000, seed=1, noise=0.05):
    rng = Rng(seed).derive("linear")
    x1 = rng.derive("x1").normal_array(n)
    x2 = rng.derive("x2").normal_array(n)
    y = x1 + noise * rng.derive("eps").normal_array(n)
    return Dataset(names=["x1", "x2"], kinds=[FLOAT, FLOAT],
                   columns=[x1, x2], target=y, target_kind=FLOAT)


def test_relevant_feature_predicts_well():
    ds = linear_dataset()
    result = knn_r2(ds, [1])
    assert result.r2_out_of_sample > 0.9
    assert result.r2_in_sample > 0.9
    assert result.n_train == 1600 and result.n_test == 400


def test_noise_feature_predicts_poorly():
    ds = linear_dataset()
    result = knn_r2(ds, [2])
    assert result.r2_out_of_sample < 0.3


def test_relevant_beats_noise():
    ds = linear_dataset()
    assert knn_r2(ds, [1]).r2_out_of_sample > knn_r2(ds, [2]).r2_out_of_sample


def test_empty_selection_warns_and_reports_zero():
    ds = linear_dataset(n=500)
    with pytest.warns(UserWarning, match="empty"):
        result = knn_r2(ds, [])
    assert result.r2_in_sample == 0.0
    assert result.r2_out_of_sample == 0.0


def test_constant_target_warns_and_reports_zero():
    rng = Rng(3).derive("const")
    ds = Dataset(names=["x1"], kinds=[FLOAT],
                 columns=[rng.derive("x").normal_array(400)],
                 target=np.full(400, 2.5), target_kind=FLOAT)
    with pytest.warns(UserWarning, match="variance"):
        result = knn_r2(ds, [1])
    assert result.r2_out_of_sample == 0.0


def test_categorical_features_participate():
    rng = Rng(4).derive("cat-eval")
    n = 1200
    codes = rng.derive("c").integers_array(5, n)
    y = codes.astype(np.float64) + 0.1 * rng.derive("e").normal_array(n)
    ds = Dataset(names=["c1"], kinds=[CAT], columns=[codes], target=y,
                 target_kind=FLOAT, cat_cardinalities={1: 5})
    assert knn_r2(ds, [1]).r2_out_of_sample > 0.9


def test_deterministic_given_seed():
    ds = linear_dataset(n=800)
    a = knn_r2(ds, [1], EvalConfig(seed=5))
    b = knn_r2(ds, [1], EvalConfig(seed=5))
    c = knn_r2(ds, [1], EvalConfig(seed=6))
    assert a == b
    assert a != c  # different split, different numbers


def test_selection_validation():
    ds = linear_dataset(n=500)
    with pytest.raises(ConfigError):
        knn_r2(ds, [3])
    with pytest.raises(ConfigError):
        knn_r2(ds, [0])
    with pytest.raises(ConfigError):
        EvalConfig(train_fraction=1.5)
    with pytest.raises(ConfigError):
        EvalConfig(k=0)
