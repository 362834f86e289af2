"""Downstream check: how well a selected feature subset predicts the target.

A k-nearest-neighbor regressor with inverse-distance weights is fit on a
seeded train split and scored by R^2 on both splits. Features are z-scored
with train-split statistics; categorical codes enter as raw numeric codes,
which is crude but uniform across methods and good enough for ordering
comparisons between subsets. In-sample predictions exclude the query row
itself, otherwise the zero-distance self-match pins R^2 near 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError
from .rng import Rng


@dataclass
class EvalConfig:
    k: int = 10
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"neighbor count must be at least 1, got {self.k}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train fraction must be in (0, 1), got {self.train_fraction}")


@dataclass
class EvalResult:
    r2_in_sample: float
    r2_out_of_sample: float
    n_train: int
    n_test: int


def _feature_matrix(dataset: Dataset, selected: list[int]) -> np.ndarray:
    cols = []
    for j in selected:
        if not 1 <= j <= dataset.n_features:
            raise ConfigError(f"feature index {j} out of range 1..{dataset.n_features}")
        cols.append(np.asarray(dataset.columns[j - 1], dtype=np.float64))
    return np.column_stack(cols)


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |a_i - b_j|^2 = |a_i|^2 + |b_j|^2 - 2 a_i . b_j, clipped against roundoff
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def _knn_predict(train_x: np.ndarray, train_y: np.ndarray, query_x: np.ndarray,
                 k: int, exclude_self: bool) -> np.ndarray:
    preds = np.empty(len(query_x))
    chunk = 512
    for start in range(0, len(query_x), chunk):
        stop = min(start + chunk, len(query_x))
        d2 = _pairwise_sq_dists(query_x[start:stop], train_x)
        if exclude_self:
            d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        kk = min(k, d2.shape[1] - (1 if exclude_self else 0))
        kk = max(kk, 1)
        idx = np.argpartition(d2, kk - 1, axis=1)[:, :kk]
        rows = np.arange(stop - start)[:, None]
        w = 1.0 / (np.sqrt(d2[rows, idx]) + 1e-12)
        preds[start:stop] = (w * train_y[idx]).sum(axis=1) / w.sum(axis=1)
    return preds


def _r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        warnings.warn("target variance is zero on this split; reporting R^2 = 0",
                      stacklevel=3)
        return 0.0
    ss_res = float(((y_true - y_pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def knn_r2(dataset: Dataset, selected: list[int],
           config: EvalConfig | None = None) -> EvalResult:
    """Fit k-NN on the train split of `selected` features; R^2 on both splits.

    An empty selection carries no predictive signal and scores 0 by
    convention (with a warning).
    """
    config = config or EvalConfig()
    n = dataset.n_rows
    perm = Rng(config.seed).derive("eval-split").permutation(n)
    n_train = max(1, int(round(config.train_fraction * n)))
    n_train = min(n_train, n - 1)
    train_rows, test_rows = perm[:n_train], perm[n_train:]
    y = np.asarray(dataset.target, dtype=np.float64)

    if not selected:
        warnings.warn("empty feature selection; reporting R^2 = 0", stacklevel=2)
        return EvalResult(0.0, 0.0, len(train_rows), len(test_rows))

    x = _feature_matrix(dataset, selected)
    mu = x[train_rows].mean(axis=0)
    sd = x[train_rows].std(axis=0)
    sd[sd == 0.0] = 1.0
    xz = (x - mu) / sd

    train_x, test_x = xz[train_rows], xz[test_rows]
    train_y, test_y = y[train_rows], y[test_rows]
    pred_in = _knn_predict(train_x, train_y, train_x, config.k, exclude_self=True)
    pred_out = _knn_predict(train_x, train_y, test_x, config.k, exclude_self=False)
    return EvalResult(r2_in_sample=_r2(train_y, pred_in),
                      r2_out_of_sample=_r2(test_y, pred_out),
                      n_train=len(train_rows), n_test=len(test_rows))
