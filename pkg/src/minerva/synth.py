"""Synthetic benchmark generators with closed-form information oracles.

Two families are provided. In the matching-pair family ("experiment A")
all features are iid uniform categoricals and the binary target fires
exactly when two designated columns agree; the population value of
I(X_k0, X_k1; Y) has a closed form, and every single feature carries zero
information about the target on its own. In the switched-regression
family ("experiment B") a hidden comparison between two categorical
columns selects which sinusoidal regression on continuous columns
produces the target, so the relevant set spans both kinds.

`brute_force_mi` computes mutual information directly from an explicit
joint table and is the oracle the closed form is checked against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import CAT, FLOAT, Dataset
from .errors import ConfigError, ContractError
from .rng import Rng

log = logging.getLogger(__name__)


def match_indicator_mi(m: int) -> float:
    """Population I(X1, X2; Y) for Y = 1{X1 = X2}, X1, X2 iid uniform on m values.

    Equals ((m-1)/m) * ln(m/(m-1)) + (1/m) * ln(m). Requires m > 2; the
    value decays to zero as m grows.
    """
    if m <= 2:
        raise ConfigError(f"category count must exceed 2, got {m}")
    return (m - 1) / m * math.log(m / (m - 1)) + math.log(m) / m


def brute_force_mi(joint: np.ndarray) -> float:
    """Mutual information in nats from an explicit 2-D joint probability table.

    Rows index states of the first variable, columns the second. The table
    must be non-negative and sum to 1 within 1e-12.
    """
    p = np.asarray(joint, dtype=np.float64)
    if p.ndim != 2:
        raise ContractError(f"joint table must be 2-D, got shape {p.shape}")
    if p.min() < 0.0:
        raise ContractError("joint table has negative entries")
    total = p.sum()
    if abs(total - 1.0) > 1e-12:
        raise ContractError(f"joint table sums to {total!r}, not 1")
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mask = p > 0.0
    outer = np.outer(px, py)
    return float(np.sum(p[mask] * np.log(p[mask] / outer[mask])))


def experiment_a_pair_joint(m: int) -> np.ndarray:
    """Exact joint of ((X1, X2), Y) for the matching-pair target, shape (m*m, 2)."""
    if m <= 2:
        raise ConfigError(f"category count must exceed 2, got {m}")
    p = np.zeros((m * m, 2))
    cell = 1.0 / (m * m)
    for a in range(m):
        for b in range(m):
            p[a * m + b, 1 if a == b else 0] = cell
    return p


def experiment_a_single_joint(m: int) -> np.ndarray:
    """Exact joint of (X1, Y) for the matching-pair target, shape (m, 2).

    Independent by symmetry: Y is a fair m-sided match regardless of X1's value.
    """
    if m <= 2:
        raise ConfigError(f"category count must exceed 2, got {m}")
    p = np.zeros((m, 2))
    p[:, 0] = (m - 1) / (m * m)
    p[:, 1] = 1.0 / (m * m)
    return p


@dataclass
class ExpASpec:
    """Matching-pair generator: d iid uniform cats on m values, Y = 1{X_k0 = X_k1}."""

    d: int
    m: int
    n: int
    k0: int
    k1: int
    seed: int = 0

    def __post_init__(self):
        if self.m <= 2:
            raise ConfigError(f"category count must exceed 2, got {self.m}")
        if self.d < 2:
            raise ConfigError(f"need at least 2 features, got d={self.d}")
        if self.n < 1:
            raise ConfigError(f"need at least 1 row, got n={self.n}")
        if not (1 <= self.k0 < self.k1 <= self.d):
            raise ConfigError(
                f"pair indices must satisfy 1 <= k0 < k1 <= d, got ({self.k0}, {self.k1})")

    @property
    def truth(self) -> list[int]:
        return [self.k0, self.k1]

    def to_dict(self) -> dict:
        return {"experiment": "A", "d": self.d, "m": self.m, "n": self.n,
                "k0": self.k0, "k1": self.k1, "seed": self.seed}


def gen_experiment_a(spec: ExpASpec) -> tuple[Dataset, list[int]]:
    """Sample a matching-pair dataset; returns (dataset, ground-truth indices)."""
    base = Rng(spec.seed).derive("experiment-a")
    columns = [base.derive(f"x{j}").integers_array(spec.m, spec.n)
               for j in range(1, spec.d + 1)]
    y = (columns[spec.k0 - 1] == columns[spec.k1 - 1]).astype(np.int64)
    ds = Dataset(
        names=[f"x{j}" for j in range(1, spec.d + 1)],
        kinds=[CAT] * spec.d,
        columns=columns,
        target=y,
        target_kind=CAT,
        cat_cardinalities={j: spec.m for j in range(1, spec.d + 1)},
    )
    return ds, spec.truth


@dataclass
class ExpBSpec:
    """Switched sinusoidal regression over mixed categorical/continuous features.

    Features are d1 iid uniform cats on m values followed by d2 iid
    uniform(0, 1) floats (global 1-based indices d1+1 .. d1+d2). The target is

        y = sum_l alphas[l] * sin(2 pi x_{j_idx[l]})   if x_k0 == x_k1
            sum_l betas[l]  * cos(2 pi x_{i_idx[l]})   otherwise

    where j_idx and i_idx are global indices of continuous features.
    """

    d1: int
    d2: int
    m: int
    n: int
    k0: int
    k1: int
    alphas: list[float] = field(default_factory=lambda: [1.0])
    j_idx: list[int] = field(default_factory=list)
    betas: list[float] = field(default_factory=lambda: [1.0])
    i_idx: list[int] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.m <= 2:
            raise ConfigError(f"category count must exceed 2, got {self.m}")
        if self.d1 < 2 or self.d2 < 1:
            raise ConfigError(f"need d1 >= 2 and d2 >= 1, got ({self.d1}, {self.d2})")
        if self.n < 1:
            raise ConfigError(f"need at least 1 row, got n={self.n}")
        if not (1 <= self.k0 < self.k1 <= self.d1):
            raise ConfigError(
                f"switch indices must satisfy 1 <= k0 < k1 <= d1, got ({self.k0}, {self.k1})")
        if len(self.alphas) != len(self.j_idx):
            raise ConfigError(
                f"alphas ({len(self.alphas)}) and j_idx ({len(self.j_idx)}) must align")
        if len(self.betas) != len(self.i_idx):
            raise ConfigError(
                f"betas ({len(self.betas)}) and i_idx ({len(self.i_idx)}) must align")
        if not self.j_idx or not self.i_idx:
            raise ConfigError("both regression branches need at least one term")
        lo, hi = self.d1 + 1, self.d1 + self.d2
        for idx in list(self.j_idx) + list(self.i_idx):
            if not (lo <= idx <= hi):
                raise ConfigError(
                    f"regression index {idx} must point at a continuous feature ({lo}..{hi})")
        if set(self.j_idx) & set(self.i_idx):
            log.warning("regression branches share continuous features: %s",
                        sorted(set(self.j_idx) & set(self.i_idx)))

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def truth(self) -> list[int]:
        return sorted({self.k0, self.k1} | set(self.j_idx) | set(self.i_idx))

    def to_dict(self) -> dict:
        return {"experiment": "B", "d1": self.d1, "d2": self.d2, "m": self.m,
                "n": self.n, "k0": self.k0, "k1": self.k1,
                "alphas": list(self.alphas), "j_idx": list(self.j_idx),
                "betas": list(self.betas), "i_idx": list(self.i_idx),
                "seed": self.seed}


def gen_experiment_b(spec: ExpBSpec) -> tuple[Dataset, list[int]]:
    """Sample a switched-regression dataset; returns (dataset, ground-truth indices)."""
    base = Rng(spec.seed).derive("experiment-b")
    cat_cols = [base.derive(f"x{j}").integers_array(spec.m, spec.n)
                for j in range(1, spec.d1 + 1)]
    float_cols = [base.derive(f"x{j}").random_array(spec.n)
                  for j in range(spec.d1 + 1, spec.d + 1)]
    columns: list[np.ndarray] = cat_cols + float_cols

    branch_a = np.zeros(spec.n)
    for a, j in zip(spec.alphas, spec.j_idx):
        branch_a += a * np.sin(2.0 * np.pi * columns[j - 1])
    branch_b = np.zeros(spec.n)
    for b, i in zip(spec.betas, spec.i_idx):
        branch_b += b * np.cos(2.0 * np.pi * columns[i - 1])
    switch = columns[spec.k0 - 1] == columns[spec.k1 - 1]
    y = np.where(switch, branch_a, branch_b)

    ds = Dataset(
        names=[f"x{j}" for j in range(1, spec.d + 1)],
        kinds=[CAT] * spec.d1 + [FLOAT] * spec.d2,
        columns=columns,
        target=y,
        target_kind=FLOAT,
        cat_cardinalities={j: spec.m for j in range(1, spec.d1 + 1)},
    )
    return ds, spec.truth
