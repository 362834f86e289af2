import numpy as np
import pytest

from minerva.data import CAT, FLOAT, Dataset
from minerva.rng import Rng


def finite_diff(fn, arrays, eps=1e-5):
    """Central finite differences of scalar fn w.r.t. each array, elementwise."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = fn()
            flat[i] = orig - eps
            lo = fn()
            flat[i] = orig
            gf[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a, b):
    # floor absorbs FD roundoff on exactly-zero gradients (the DV objective
    # is shift invariant, so bias lanes feeding the critic head have true
    # gradient 0 and central differences return pure noise there)
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-6)
    return np.max(np.abs(a - b)) / denom


def tiny_cat_dataset(n=400, m=4, d=3, seed=5) -> Dataset:
    """d uniform categorical columns, y = 1{x1 == x2} as a categorical target."""
    rng = Rng(seed).derive("tiny-cat")
    cols = [rng.derive(f"c{j}").integers_array(m, n) for j in range(d)]
    y = (cols[0] == cols[1]).astype(np.int64)
    return Dataset(names=[f"x{j + 1}" for j in range(d)], kinds=[CAT] * d,
                   columns=cols, target=y, target_kind=CAT,
                   cat_cardinalities={j + 1: m for j in range(d)})


def tiny_float_dataset(n=400, d=2, seed=9) -> Dataset:
    """Float columns with y = x1 + small noise, float target."""
    rng = Rng(seed).derive("tiny-float")
    cols = [rng.derive(f"f{j}").random_array(n) for j in range(d)]
    y = cols[0] + 0.01 * rng.derive("noise").normal_array(n)
    return Dataset(names=[f"x{j + 1}" for j in range(d)], kinds=[FLOAT] * d,
                   columns=cols, target=y, target_kind=FLOAT)


@pytest.fixture
def cat_dataset():
    return tiny_cat_dataset()


@pytest.fixture
def float_dataset():
    return tiny_float_dataset()
