"""KSG k-nearest-neighbor mutual information estimator and threshold filter.

For each point the distance to its k-th nearest neighbor in the joint
(x, y) space under the max norm defines a radius; counting how many
marginal neighbors fall strictly inside that radius in each coordinate
gives the estimator

    I = psi(k) + psi(n) - < psi(n_x + 1) + psi(n_y + 1) >

with psi the digamma function. Neighbor search is exact brute force,
chunked to bound memory; marginal counts use sorting, which is exact.
Discrete columns are de-tied with a deterministic additive jitter far
below data scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

from .data import Dataset
from .errors import ConfigError, ContractError
from .rng import Rng

_CHUNK_ROWS = 128


@dataclass
class KsgConfig:
    k: int = 5
    threshold: float = 0.02
    jitter_scale: float = 1e-10

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"neighbor count must be at least 1, got {self.k}")
        if self.threshold < 0:
            raise ConfigError(f"threshold must be nonnegative, got {self.threshold}")
        if self.jitter_scale <= 0:
            raise ConfigError(f"jitter scale must be positive, got {self.jitter_scale}")


def _kth_joint_distance(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Max-norm distance from each point to its k-th nearest neighbor (exact)."""
    n = len(x)
    out = np.empty(n)
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        dist = x[start:stop, None] - x[None, :]
        np.abs(dist, out=dist)
        dy = y[start:stop, None] - y[None, :]
        np.abs(dy, out=dy)
        np.maximum(dist, dy, out=dist)
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf  # drop self
        out[start:stop] = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return out


def _marginal_counts(values: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Count points strictly within radius of each point along one axis."""
    ranked = np.sort(values)
    # open interval (v - r, v + r): side="right" excludes the lower endpoint,
    # side="left" the upper; the point itself is inside whenever r > 0
    lo = np.searchsorted(ranked, values - radii, side="right")
    hi = np.searchsorted(ranked, values + radii, side="left")
    return np.maximum(hi - lo - 1, 0)


def ksg_mi(x_column, y_column, k: int = 5) -> float:
    """KSG estimate of I(X; Y) in nats from two real-valued samples."""
    x = np.asarray(x_column, dtype=np.float64).reshape(-1)
    y = np.asarray(y_column, dtype=np.float64).reshape(-1)
    if len(x) != len(y):
        raise ContractError(f"column lengths differ: {len(x)} vs {len(y)}")
    n = len(x)
    if n <= k:
        raise ContractError(f"need more than k={k} samples, got {n}")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        warnings.warn("degenerate input: constant column, returning 0", stacklevel=2)
        return 0.0
    radii = _kth_joint_distance(x, y, k)
    if radii.min() == 0.0:
        raise ContractError(
            "k-th neighbor distance is zero for some point; the estimator "
            "assumes continuous samples, so de-tie heavily duplicated columns "
            "first (ksg_scores applies a jitter for this)")
    n_x = _marginal_counts(x, radii)
    n_y = _marginal_counts(y, radii)
    return float(digamma(k) + digamma(n)
                 - np.mean(digamma(n_x + 1) + digamma(n_y + 1)))


def _jitter(col: np.ndarray, scale: float, rng: Rng) -> np.ndarray:
    """Break ties with uniform noise of amplitude scale * range; no-op if untied."""
    col = np.asarray(col, dtype=np.float64)
    if len(np.unique(col)) == len(col):
        return col
    span = np.ptp(col)
    if span == 0.0:
        return col  # constant column; ksg_mi handles the degenerate case
    amp = scale * span
    return col + (2.0 * rng.random_array(len(col)) - 1.0) * amp


def ksg_scores(dataset: Dataset, config: KsgConfig, seed: int = 0) -> np.ndarray:
    """Per-feature ksg_mi(X_i, Y) in dataset order; deterministic given seed."""
    base = Rng(seed).derive("ksg-jitter")
    y = _jitter(dataset.target, config.jitter_scale, base.derive("target"))
    scores = np.empty(dataset.n_features)
    for j in range(dataset.n_features):
        x = _jitter(dataset.columns[j], config.jitter_scale,
                    base.derive(dataset.names[j]))
        scores[j] = ksg_mi(x, y, config.k)
    return scores


def ksg_filter(dataset: Dataset, config: KsgConfig, seed: int = 0) -> list[int]:
    """Features whose pairwise MI with the target exceeds the threshold (1-based)."""
    scores = ksg_scores(dataset, config, seed)
    return [j + 1 for j in range(len(scores)) if scores[j] > config.threshold]
