"""Empirical Donsker-Varadhan mutual information estimation.

Given a critic f and a batch of n (x, y) rows plus a shuffling permutation
sigma, the two empirical terms are

    mu     = (1/n) sum_i f(p * x_i, y_i)
    log_nu = log((1/n) sum_i exp(f(p * x_sigma(i), y_i)))

and the training objective is v = -mu + log_nu, whose negation lower-bounds
I(X; Y) in nats at the optimum over critics. The shuffled term pairs each
target with an independently drawn feature row, which approximates sampling
from the product of marginals.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import ndgrad as ng
from . import statnet
from .data import Dataset
from .errors import ContractError, NumericError
from .ndgrad import Tensor
from .rng import Rng


@dataclass
class Batch:
    """n feature/target rows plus the permutation used for the marginal term."""

    x_cols: list[np.ndarray]  # feature columns, dataset order
    y: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        n = len(self.y)
        if any(len(c) != n for c in self.x_cols):
            raise ContractError("feature columns and target differ in length")
        s = np.sort(self.sigma)
        if len(self.sigma) != n or not np.array_equal(s, np.arange(n)):
            raise ContractError("sigma is not a permutation of the batch rows")

    @property
    def n(self) -> int:
        return len(self.y)


@dataclass
class MiEstimate:
    """One DV evaluation; `value` is the objective v, mi_nats its negation."""

    value: float
    mu: float
    log_nu: float
    n: int
    node: Tensor | None = dc_field(default=None, repr=False, compare=False)

    @property
    def mi_nats(self) -> float:
        return -self.value


def sample_permutation(n: int, rng: Rng) -> np.ndarray:
    """Uniform permutation of {0..n-1}; n >= 2 so shuffling can decouple pairs."""
    if n < 2:
        raise ContractError(f"cannot shuffle a batch of {n} rows")
    return rng.permutation(n)


def make_batch(dataset: Dataset, rows: np.ndarray, rng: Rng) -> Batch:
    """Materialize the given row indices with a fresh permutation."""
    return Batch(x_cols=[c[rows] for c in dataset.columns],
                 y=dataset.target[rows],
                 sigma=sample_permutation(len(rows), rng))


def _check_scores(scores: np.ndarray, what: str) -> None:
    finite = np.isfinite(scores)
    if not finite.all():
        row = int(np.argmin(finite))
        raise NumericError(f"non-finite {what} score at row {row}")


def mu_hat(f, params, p, batch: Batch) -> Tensor:
    """Mean critic score over jointly drawn (x, y) pairs; scalar tensor."""
    if batch.n == 0:
        raise ContractError("empty batch")
    scores = f(params, p, batch.x_cols, batch.y)
    _check_scores(scores.data, "joint")
    return scores.mean()


def log_nu_hat(f, params, p, batch: Batch) -> Tensor:
    """Max-shifted log-mean-exp of critic scores on shuffled pairs."""
    if batch.n == 0:
        raise ContractError("empty batch")
    scores = f(params, p, [c[batch.sigma] for c in batch.x_cols], batch.y)
    _check_scores(scores.data, "shuffled")
    return ng.log_mean_exp(scores)


def v_objective(params, p, batch: Batch, f=statnet.forward) -> MiEstimate:
    """DV objective v = -mu + log_nu, differentiable w.r.t. params and p.

    Runs the critic once on the stacked joint and shuffled rows, so both
    terms share one tape.
    """
    if batch.n == 0:
        raise ContractError("empty batch")
    n = batch.n
    stacked_cols = [np.concatenate([c, c[batch.sigma]]) for c in batch.x_cols]
    stacked_y = np.concatenate([batch.y, batch.y])
    scores = f(params, p, stacked_cols, stacked_y)
    _check_scores(scores.data[:n], "joint")
    _check_scores(scores.data[n:], "shuffled")
    mu = ng.slice_rows(scores, 0, n).mean()
    log_nu = ng.log_mean_exp(ng.slice_rows(scores, n, 2 * n))
    node = -mu + log_nu
    return MiEstimate(value=node.item(), mu=mu.item(), log_nu=log_nu.item(),
                      n=n, node=node)


def estimate_mi(params, p, batches: list[Batch], f=statnet.forward) -> float:
    """Evaluation-mode estimate: mean of -v over held-out batches, in nats."""
    if not batches:
        raise ContractError("need at least one evaluation batch")
    return float(np.mean([v_objective(params, p, b, f=f).mi_nats for b in batches]))
