import math

import numpy as np
import pytest

from conftest import tiny_cat_dataset
from minerva.data import CAT, Dataset
from minerva.errors import ContractError, NumericError
from minerva.mine import (
    Batch,
    estimate_mi,
    make_batch,
    mu_hat,
    log_nu_hat,
    sample_permutation,
    v_objective,
)
from minerva.ndgrad import Tensor
from minerva.rng import Rng
from minerva.selector import TrainConfig, stage1_train
from minerva.statnet import NetworkSpec, init_params


def const_critic(c):
    def f(params, p, x_cols, y):
        return Tensor(np.full((len(y), 1), float(c)))
    return f


def sum_critic(params, p, x_cols, y):
    return Tensor((np.asarray(x_cols[0], dtype=np.float64)
                   + np.asarray(y, dtype=np.float64)).reshape(-1, 1))


def target_critic(params, p, x_cols, y):
    return Tensor(np.asarray(y, dtype=np.float64).reshape(-1, 1))


def test_sample_permutation_contract_and_bijection():
    with pytest.raises(ContractError):
        sample_permutation(1, Rng(0))
    perm = sample_permutation(50, Rng(1))
    assert sorted(perm.tolist()) == list(range(50))


def test_two_row_shuffle_is_a_fair_coin():
    # for n = 2 the permutation is identity with probability exactly 1/2
    rng = Rng(2).derive("coin")
    hits = sum(sample_permutation(2, rng)[0] == 0 for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) < 0.02


def test_batch_requires_a_bijection():
    x = [np.arange(4)]
    y = np.arange(4)
    with pytest.raises(ContractError):
        Batch(x_cols=x, y=y, sigma=np.array([0, 0, 1, 2]))
    ok = Batch(x_cols=x, y=y, sigma=np.array([1, 0, 3, 2]))
    assert ok.n == 4


def test_make_batch_materializes_requested_rows(cat_dataset):
    rows = np.array([5, 1, 9, 33])
    batch = make_batch(cat_dataset, rows, Rng(7))
    for got, col in zip(batch.x_cols, cat_dataset.columns):
        assert np.array_equal(got, col[rows])
    assert np.array_equal(batch.y, cat_dataset.target[rows])
    assert batch.n == 4


def test_constant_critic_gives_zero_objective():
    batch = Batch(x_cols=[np.zeros(4)], y=np.zeros(4),
                  sigma=np.array([1, 0, 3, 2]))
    est = v_objective(None, None, batch, f=const_critic(1.7))
    assert est.value == 0.0
    assert est.mu == pytest.approx(1.7, abs=0)
    assert est.log_nu == pytest.approx(1.7, abs=0)
    assert est.mi_nats == 0.0


def test_mu_is_mean_score_on_joint_pairs():
    batch = Batch(x_cols=[np.array([1.0, 3.0])], y=np.array([2.0, 4.0]),
                  sigma=np.array([1, 0]))
    est = v_objective(None, None, batch, f=sum_critic)
    assert est.mu == pytest.approx(5.0, abs=1e-15)      # mean of 1+2 and 3+4
    assert est.log_nu == pytest.approx(5.0, abs=1e-12)  # swap keeps x+y sums
    assert mu_hat(sum_critic, None, None, batch).item() == pytest.approx(5.0)


def test_log_nu_is_log_mean_exp_on_shuffled_pairs():
    batch = Batch(x_cols=[np.array([9.0, 9.0])],
                  y=np.array([0.0, math.log(3.0)]),
                  sigma=np.array([1, 0]))
    est = v_objective(None, None, batch, f=target_critic)
    assert est.log_nu == pytest.approx(math.log(2.0), abs=1e-12)
    assert est.mu == pytest.approx(math.log(3.0) / 2.0, abs=1e-15)
    direct = log_nu_hat(target_critic, None, None, batch).item()
    assert direct == pytest.approx(est.log_nu, abs=1e-12)


def test_value_is_exactly_neg_mu_plus_log_nu(cat_dataset):
    spec = NetworkSpec.from_dataset(cat_dataset)
    params = init_params(spec, 0)
    batch = make_batch(cat_dataset, np.arange(64), Rng(3))
    est = v_objective(params, np.ones(spec.d), batch)
    assert est.value == -est.mu + est.log_nu
    assert est.mi_nats == -est.value
    assert est.node.data.size == 1


def test_objective_invariant_under_row_relabeling(cat_dataset):
    spec = NetworkSpec.from_dataset(cat_dataset)
    params = init_params(spec, 1)
    rows = np.arange(32)
    batch = make_batch(cat_dataset, rows, Rng(5))

    pi = Rng(6).permutation(32)
    inv = np.argsort(pi)
    conj = Batch(x_cols=[c[pi] for c in batch.x_cols], y=batch.y[pi],
                 sigma=inv[batch.sigma[pi]])

    a = v_objective(params, np.ones(spec.d), batch)
    b = v_objective(params, np.ones(spec.d), conj)
    assert b.mu == pytest.approx(a.mu, abs=1e-12)
    assert b.log_nu == pytest.approx(a.log_nu, abs=1e-12)
    assert b.value == pytest.approx(a.value, abs=1e-12)


def test_nonfinite_scores_are_reported():
    def bad(params, p, x_cols, y):
        out = np.zeros((len(y), 1))
        out[0, 0] = np.nan
        return Tensor(out)

    batch = Batch(x_cols=[np.zeros(4)], y=np.zeros(4),
                  sigma=np.array([1, 0, 3, 2]))
    with pytest.raises(NumericError, match="joint"):
        v_objective(None, None, batch, f=bad)


def test_estimate_mi_averages_batches():
    b1 = Batch(x_cols=[np.zeros(4)], y=np.zeros(4), sigma=np.array([1, 0, 3, 2]))
    b2 = Batch(x_cols=[np.zeros(4)], y=np.zeros(4), sigma=np.array([3, 2, 1, 0]))
    assert estimate_mi(None, None, [b1, b2], f=const_critic(2.0)) == 0.0
    with pytest.raises(ContractError):
        estimate_mi(None, None, [], f=const_critic(2.0))


def test_trained_estimate_respects_zero_mi_floor():
    # X and Y independent: the DV bound cannot exceed I = 0 beyond noise
    rng = Rng(40).derive("indep")
    n = 10_000
    ds = Dataset(names=["x1"], kinds=[CAT],
                 columns=[rng.derive("x").integers_array(4, n)],
                 target=rng.derive("y").integers_array(2, n),
                 target_kind=CAT, cat_cardinalities={1: 4})
    config = TrainConfig(learning_rate=0.03, batch_size=512,
                         stage1_max_steps=400, eval_interval=100,
                         patience=4, seed=0)
    params = stage1_train(ds, NetworkSpec.from_dataset(ds), config)

    eval_rng = Rng(41).derive("mi-floor")
    batches = [make_batch(ds, eval_rng.integers_array(n, 512), eval_rng)
               for _ in range(20)]
    mi = estimate_mi(params, np.ones(1), batches)
    assert mi < 0.05
