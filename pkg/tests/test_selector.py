import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import tiny_cat_dataset
from minerva.data import CAT, Dataset
from minerva.errors import ConfigError, DegenerateWeightsError
from minerva.mine import make_batch, v_objective
from minerva.ndgrad import Tensor
from minerva.rng import Rng
from minerva.selector import (
    SelectionOutcome,
    TrainConfig,
    _regularizer,
    classify_selection,
    loss,
    select_features,
    snap_support,
    stage1_train,
    stage2_train,
)
from minerva.statnet import NetworkSpec, init_params
from minerva.synth import ExpASpec, gen_experiment_a


def reg_value(p, c1=1.0, c2=1.0, a=1.0):
    return _regularizer(Tensor(np.asarray(p, dtype=np.float64)), c1, c2, a).item()


# --- regularizer algebra ----------------------------------------------------

def test_all_ones_gates_hit_the_drift_target():
    # p = 1_d with a = sqrt(d): direction L1 is sqrt(d), drift is zero
    for d in (2, 4, 9):
        val = reg_value(np.ones(d), c1=1.0, c2=1.0, a=math.sqrt(d))
        assert val == pytest.approx(math.sqrt(d), abs=1e-12)


def test_one_hot_gate_is_the_l1_minimum():
    # a unit one-hot vector: direction L1 = 1 (its smallest possible value)
    assert reg_value([1.0, 0.0, 0.0], c1=1.0, c2=0.0) == pytest.approx(1.0)
    # and with c2 on, drift measures distance of the norm from a
    assert reg_value([1.0, 0.0, 0.0], c1=0.0, c2=1.0, a=3.0) == pytest.approx(4.0)


def test_three_four_five_direction():
    assert reg_value([3.0, 4.0], c1=1.0, c2=0.0) == pytest.approx(7.0 / 5.0,
                                                                  abs=1e-12)


def test_loss_decomposes_into_objective_plus_penalties(cat_dataset):
    spec = NetworkSpec.from_dataset(cat_dataset)
    params = init_params(spec, 0)
    batch = make_batch(cat_dataset, np.arange(48), Rng(2))
    p = Tensor(np.array([[0.9, 1.1, 0.7]]))
    total = loss(params, p, 1.3, 0.7, 2.0, batch).item()
    v = v_objective(params, p, batch).value
    assert total == pytest.approx(v + reg_value([0.9, 1.1, 0.7], 1.3, 0.7, 2.0),
                                  abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=6),
       st.floats(0.1, 50.0))
def test_direction_l1_is_scale_invariant(vals, scale):
    p = np.array(vals)
    if np.linalg.norm(p) < 1e-3:
        return
    base = reg_value(p, c1=1.0, c2=0.0)
    scaled = reg_value(p * scale, c1=1.0, c2=0.0)
    assert scaled == pytest.approx(base, rel=1e-9)


def test_degenerate_gates_raise():
    with pytest.raises(DegenerateWeightsError):
        reg_value(np.zeros(4))


# --- snapping and classification --------------------------------------------

def test_snap_support_examples():
    snapped, kept = snap_support(np.array([0.5, 1e-6, -2.0]), 1e-5)
    assert kept == [1, 3]
    assert np.array_equal(snapped, [0.5, 0.0, -2.0])
    # negative survivors count by magnitude
    _, kept2 = snap_support(np.array([-0.2, 0.0, 0.1]), 0.15)
    assert kept2 == [1]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=8),
       st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_support_shrinks_as_threshold_grows(vals, t_lo, t_hi):
    lo, hi = sorted([t_lo, t_hi])
    p = np.array(vals)
    _, keep_lo = snap_support(p, lo)
    _, keep_hi = snap_support(p, hi)
    assert set(keep_hi) <= set(keep_lo)


def test_classification_examples():
    assert classify_selection([3, 8], [3, 8]) is SelectionOutcome.EXACT
    assert classify_selection([3], [3, 8]) is SelectionOutcome.TYPE_I
    assert classify_selection([1, 3, 8], [3, 8]) is SelectionOutcome.TYPE_II
    assert classify_selection([], [3, 8]) is SelectionOutcome.TYPE_I
    # missing truth dominates: a set that both misses and pads is Type I
    assert classify_selection([1, 3], [3, 8]) is SelectionOutcome.TYPE_I
    assert SelectionOutcome.EXACT.value == "Exact"
    assert SelectionOutcome.TYPE_I.value == "NonExactTypeI"
    assert SelectionOutcome.TYPE_II.value == "NonExactTypeII"


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(1, 8)), st.sets(st.integers(1, 8), min_size=1))
def test_classification_cases_are_exhaustive(selected, truth):
    out = classify_selection(sorted(selected), sorted(truth))
    if selected == truth:
        assert out is SelectionOutcome.EXACT
    elif truth <= selected:
        assert out is SelectionOutcome.TYPE_II
    else:
        assert out is SelectionOutcome.TYPE_I


# --- configuration ----------------------------------------------------------

def test_config_defaults_follow_published_operating_point():
    config = TrainConfig()
    assert config.learning_rate == pytest.approx(1e-4)
    assert config.threshold == pytest.approx(1e-5)
    assert config.c1 == 1.0 and config.c2 == 1.0
    assert config.resolved_drift_target(9) == pytest.approx(3.0)
    assert TrainConfig(drift_target=2.5).resolved_drift_target(9) == 2.5


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(c1=-0.1)
    with pytest.raises(ConfigError):
        TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        TrainConfig(val_fraction=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(threshold=-1.0)


# --- training behavior (small budgets) --------------------------------------

def quick_config(**kw):
    base = dict(learning_rate=0.03, batch_size=256, stage1_max_steps=300,
                stage2_max_steps=200, eval_interval=100, patience=10, seed=0)
    base.update(kw)
    return TrainConfig(**base)


def test_select_features_is_deterministic():
    ds, _ = gen_experiment_a(ExpASpec(d=3, m=4, n=2000, k0=1, k1=2, seed=5))
    spec = NetworkSpec.from_dataset(ds)
    config = quick_config()
    r1 = select_features(ds, spec, config)
    r2 = select_features(ds, spec, config)
    assert r1.selected == r2.selected
    assert np.array_equal(r1.final_p, r2.final_p)
    assert [(t.step, t.mi_nats) for t in r1.mi_trace] == \
        [(t.step, t.mi_nats) for t in r2.mi_trace]


def test_zero_regularization_keeps_every_gate():
    ds, _ = gen_experiment_a(ExpASpec(d=3, m=4, n=2000, k0=1, k1=2, seed=6))
    spec = NetworkSpec.from_dataset(ds)
    result = select_features(ds, spec, quick_config(c1=0.0, c2=0.0,
                                                    threshold=0.5))
    assert result.selected == [1, 2, 3]


def test_single_relevant_feature_is_kept():
    rng = Rng(50).derive("single")
    n = 3000
    x = rng.derive("x").integers_array(4, n)
    ds = Dataset(names=["x1"], kinds=[CAT], columns=[x],
                 target=(x % 2).astype(np.int64), target_kind=CAT,
                 cat_cardinalities={1: 4})
    result = select_features(ds, NetworkSpec.from_dataset(ds),
                             quick_config(threshold=0.05))
    assert result.selected == [1]


def test_shuffled_target_estimates_no_information():
    ds, _ = gen_experiment_a(ExpASpec(d=2, m=4, n=8000, k0=1, k1=2, seed=7))
    shuffled = Dataset(names=ds.names, kinds=ds.kinds,
                       columns=[c.copy() for c in ds.columns],
                       target=ds.target[Rng(8).permutation(ds.n_rows)],
                       target_kind=ds.target_kind,
                       cat_cardinalities=dict(ds.cat_cardinalities))
    spec = NetworkSpec.from_dataset(shuffled)
    config = quick_config(stage1_max_steps=400)
    _ = stage1_train(shuffled, spec, config)
    result = select_features(shuffled, spec, config)
    final_mi = result.mi_trace[-1].mi_nats
    assert -0.05 <= final_mi <= 0.05


def test_stage2_requires_matching_spec():
    ds, _ = gen_experiment_a(ExpASpec(d=3, m=4, n=2000, k0=1, k1=2, seed=9))
    spec = NetworkSpec.from_dataset(ds)
    params = stage1_train(ds, spec, quick_config(stage1_max_steps=100))
    other = NetworkSpec.from_dataset(ds, hidden_width=32)
    with pytest.raises(ConfigError):
        stage2_train(params, ds, other, quick_config())


def test_training_needs_enough_rows():
    ds, _ = gen_experiment_a(ExpASpec(d=3, m=4, n=300, k0=1, k1=2, seed=10))
    with pytest.raises(ConfigError):
        select_features(ds, NetworkSpec.from_dataset(ds),
                        quick_config(batch_size=512))


def test_trace_steps_are_monotone_across_stages():
    ds, _ = gen_experiment_a(ExpASpec(d=3, m=4, n=2000, k0=1, k1=2, seed=11))
    result = select_features(ds, NetworkSpec.from_dataset(ds), quick_config())
    steps = [t.step for t in result.mi_trace]
    assert steps == sorted(steps)
    assert result.stage1_steps > 0 and result.stage2_steps > 0
