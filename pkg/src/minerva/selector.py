"""Two-stage trainer that turns the DV estimator into a feature selector.

Stage 1 fits the critic with all gates pinned to 1, maximizing the MI
lower bound. Stage 2 copies the fitted critic and descends the regularized
loss

    loss = v(phi, p) + c1 * ||p / ||p||_2||_1 + c2 * (||p||_2 - a)^2

jointly in (phi, p) by plain SGD. The normalized L1 term rewards sparse
gate directions without caring about scale; the drift term anchors the
gate norm near `a` so the L1 pressure cannot cheat by shrinking everything.
After training, gates with |p_i| <= threshold are snapped to exact zero and
the surviving support is the selected feature set (1-based indices).

Both stages evaluate on frozen held-out batches every `eval_interval`
steps and stop early once `patience` evaluations pass without improvement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import ndgrad as ng
from .data import Dataset
from .errors import ConfigError, DegenerateWeightsError, NumericError, TrainingError
from .mine import Batch, estimate_mi, make_batch, v_objective
from .ndgrad import Tensor
from .rng import Rng
from .statnet import NetworkSpec, StatNetParams, init_params


@dataclass
class TrainConfig:
    """Hyperparameters for both stages; defaults follow the method's published
    operating point, with the evaluation protocol made explicit."""

    learning_rate: float = 1e-4
    c1: float = 1.0
    c2: float = 1.0
    drift_target: float | None = None    # None resolves to sqrt(d) at train time
    threshold: float = 1e-5
    batch_size: int = 512
    stage1_max_steps: int = 5000
    stage2_max_steps: int = 10000
    patience: int = 10
    seed: int = 0
    eval_interval: int = 100
    eval_batches: int = 20
    improvement_tol: float = 1e-4
    clip_norm: float = 10.0
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigError("regularization coefficients must be nonnegative")
        if self.drift_target is not None and self.drift_target <= 0:
            raise ConfigError(f"drift target must be positive, got {self.drift_target}")
        if self.threshold < 0:
            raise ConfigError(f"threshold must be nonnegative, got {self.threshold}")
        if self.batch_size < 2:
            raise ConfigError(f"batch size must be at least 2, got {self.batch_size}")
        if self.stage1_max_steps < 0 or self.stage2_max_steps < 0:
            raise ConfigError("step limits must be nonnegative")
        if self.patience < 1:
            raise ConfigError(f"patience must be at least 1, got {self.patience}")
        if self.eval_interval < 1 or self.eval_batches < 1:
            raise ConfigError("evaluation interval and batch count must be at least 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"validation fraction must be in (0, 1), got {self.val_fraction}")

    def resolved_drift_target(self, d: int) -> float:
        return self.drift_target if self.drift_target is not None else math.sqrt(d)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate, "c1": self.c1, "c2": self.c2,
            "drift_target": self.drift_target, "threshold": self.threshold,
            "batch_size": self.batch_size,
            "stage1_max_steps": self.stage1_max_steps,
            "stage2_max_steps": self.stage2_max_steps,
            "patience": self.patience, "seed": self.seed,
            "eval_interval": self.eval_interval, "eval_batches": self.eval_batches,
            "improvement_tol": self.improvement_tol, "clip_norm": self.clip_norm,
            "val_fraction": self.val_fraction,
        }


@dataclass
class TracePoint:
    step: int
    mi_nats: float


class SelectionOutcome(str, Enum):
    EXACT = "Exact"
    TYPE_I = "NonExactTypeI"
    TYPE_II = "NonExactTypeII"


@dataclass
class SelectionResult:
    """Thresholded support of the trained gate vector plus training telemetry."""

    selected: list[int]               # 1-based, sorted
    final_p: np.ndarray               # (d,), post-snap
    mi_trace: list[TracePoint]
    stage1_steps: int
    stage2_steps: int


def _l2_guarded(p: Tensor) -> Tensor:
    norm = ng.l2_norm(p)
    if norm.item() < 1e-12:
        raise DegenerateWeightsError(
            f"gate vector norm {norm.item():.3e} collapsed below 1e-12; "
            "the normalized L1 penalty is undefined")
    return norm


def loss(params: StatNetParams, p: Tensor, c1: float, c2: float, a: float,
         batch: Batch) -> Tensor:
    """Regularized objective as a scalar tensor differentiable in (params, p)."""
    total, _ = _loss_terms(params, p, c1, c2, a, batch)
    return total


def _regularizer(p: Tensor, c1: float, c2: float, a: float) -> Tensor:
    norm = _l2_guarded(p)
    l1_of_direction = ng.l1_norm(p / norm)
    drift = (norm - a) * (norm - a)
    return c1 * l1_of_direction + c2 * drift


def _loss_terms(params, p, c1, c2, a, batch):
    est = v_objective(params, p, batch)
    total = est.node + _regularizer(p, c1, c2, a)
    return total, est


def snap_support(p: np.ndarray, threshold: float) -> tuple[np.ndarray, list[int]]:
    """Zero entries with |p_i| <= threshold; return (snapped copy, 1-based support)."""
    snapped = np.asarray(p, dtype=np.float64).reshape(-1).copy()
    snapped[np.abs(snapped) <= threshold] = 0.0
    selected = [i + 1 for i in range(len(snapped)) if snapped[i] != 0.0]
    return snapped, selected


def classify_selection(selected, truth) -> SelectionOutcome:
    """Exact if the sets match; Type I if truth is missed; Type II if padded."""
    s, t = set(selected), set(truth)
    if s == t:
        return SelectionOutcome.EXACT
    if not t <= s:
        return SelectionOutcome.TYPE_I
    return SelectionOutcome.TYPE_II


def _split_rows(n: int, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    perm = Rng(config.seed).derive("train-val-split").permutation(n)
    val_n = max(1, int(round(config.val_fraction * n)))
    return perm[val_n:], perm[:val_n]


def _frozen_eval_batches(dataset: Dataset, val_rows: np.ndarray,
                         config: TrainConfig, rng: Rng) -> list[Batch]:
    # with-replacement draws so any validation size supports full batches
    return [make_batch(dataset,
                       val_rows[rng.integers_array(len(val_rows), config.batch_size)],
                       rng)
            for _ in range(config.eval_batches)]


def _check_dataset(dataset: Dataset, spec: NetworkSpec, config: TrainConfig) -> None:
    if dataset.n_features != spec.d:
        raise ConfigError(
            f"dataset has {dataset.n_features} features but spec expects {spec.d}")
    if dataset.n_rows < 2 * config.batch_size:
        raise ConfigError(
            f"dataset of {dataset.n_rows} rows is too small for batch size "
            f"{config.batch_size} (need at least {2 * config.batch_size})")


def _sgd_step(tensors: list[Tensor], lr: float) -> None:
    for t in tensors:
        if t.grad is not None:
            t.data = t.data - lr * t.grad


def stage1_train(dataset: Dataset, spec: NetworkSpec, config: TrainConfig) -> StatNetParams:
    """Fit the critic at p = 1 by SGD on v; early-stops on held-out MI."""
    params, _, _ = _stage1(dataset, spec, config)
    return params


def _stage1(dataset, spec, config):
    _check_dataset(dataset, spec, config)
    train_rows, val_rows = _split_rows(dataset.n_rows, config)
    stage_rng = Rng(config.seed).derive("stage1")
    eval_batches = _frozen_eval_batches(dataset, val_rows, config,
                                        stage_rng.derive("eval"))
    batch_rng = stage_rng.derive("batches")

    params = init_params(spec, config.seed)
    p_ones = Tensor(np.ones((1, spec.d)))
    trace = [TracePoint(0, estimate_mi(params, p_ones, eval_batches))]
    best = trace[0].mi_nats
    stale = 0
    steps_done = 0
    for step in range(1, config.stage1_max_steps + 1):
        rows = train_rows[batch_rng.integers_array(len(train_rows), config.batch_size)]
        batch = make_batch(dataset, rows, batch_rng)
        params.zero_grad()
        try:
            est = v_objective(params, p_ones, batch)
        except NumericError as exc:
            raise TrainingError(f"stage 1 diverged at step {step}: {exc}") from None
        if not math.isfinite(est.value):
            raise TrainingError(f"stage 1 diverged at step {step}: v = {est.value!r}")
        ng.backward(est.node)
        ng.clip_global_norm(params.parameters(), config.clip_norm)
        _sgd_step(params.parameters(), config.learning_rate)
        steps_done = step
        if step % config.eval_interval == 0:
            mi = estimate_mi(params, p_ones, eval_batches)
            trace.append(TracePoint(step, mi))
            if mi > best + config.improvement_tol:
                best = mi
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return params, trace, steps_done


def stage2_train(params_init: StatNetParams, dataset: Dataset, spec: NetworkSpec,
                 config: TrainConfig) -> SelectionResult:
    """Joint SGD on (critic copy, gates) under the regularized loss.

    `spec` must be the one `params_init` was built from.
    """
    if spec is not params_init.spec and spec.to_dict() != params_init.spec.to_dict():
        raise ConfigError("spec does not match the stage-1 parameters")
    p_final, trace, steps = _stage2(params_init, dataset, config)
    snapped, selected = snap_support(p_final, config.threshold)
    return SelectionResult(selected=selected, final_p=snapped, mi_trace=trace,
                           stage1_steps=0, stage2_steps=steps)


def _stage2(params_init, dataset, config):
    spec = params_init.spec
    _check_dataset(dataset, spec, config)
    train_rows, val_rows = _split_rows(dataset.n_rows, config)
    stage_rng = Rng(config.seed).derive("stage2")
    eval_batches = _frozen_eval_batches(dataset, val_rows, config,
                                        stage_rng.derive("eval"))
    batch_rng = stage_rng.derive("batches")

    phi = params_init.copy()
    p = Tensor(np.ones((1, spec.d)), requires_grad=True)
    a = config.resolved_drift_target(spec.d)
    trainables = phi.parameters() + [p]

    def eval_loss_and_mi():
        mi = estimate_mi(phi, p, eval_batches)
        reg = _regularizer(p, config.c1, config.c2, a).item()
        return -mi + reg, mi

    best_loss, mi0 = eval_loss_and_mi()
    trace = [TracePoint(0, mi0)]
    stale = 0
    steps_done = 0
    for step in range(1, config.stage2_max_steps + 1):
        rows = train_rows[batch_rng.integers_array(len(train_rows), config.batch_size)]
        batch = make_batch(dataset, rows, batch_rng)
        phi.zero_grad()
        p.zero_grad()
        try:
            total, _ = _loss_terms(phi, p, config.c1, config.c2, a, batch)
        except NumericError as exc:
            raise TrainingError(f"stage 2 diverged at step {step}: {exc}") from None
        except DegenerateWeightsError as exc:
            raise DegenerateWeightsError(f"stage 2, step {step}: {exc}") from None
        if not math.isfinite(total.item()):
            raise TrainingError(f"stage 2 diverged at step {step}: loss = {total.item()!r}")
        ng.backward(total)
        ng.clip_global_norm(trainables, config.clip_norm)
        _sgd_step(trainables, config.learning_rate)
        steps_done = step
        if step % config.eval_interval == 0:
            cur_loss, mi = eval_loss_and_mi()
            trace.append(TracePoint(step, mi))
            if cur_loss < best_loss - config.improvement_tol:
                best_loss = cur_loss
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
    return p.data.reshape(-1), trace, steps_done


def select_features(dataset: Dataset, spec: NetworkSpec,
                    config: TrainConfig) -> SelectionResult:
    """Stage 1 then stage 2; traces are concatenated on a shared step axis."""
    params, trace1, steps1 = _stage1(dataset, spec, config)
    p_final, trace2, steps2 = _stage2(params, dataset, config)
    snapped, selected = snap_support(p_final, config.threshold)
    merged = list(trace1) + [TracePoint(t.step + steps1, t.mi_nats) for t in trace2]
    return SelectionResult(selected=selected, final_p=snapped, mi_trace=merged,
                           stage1_steps=steps1, stage2_steps=steps2)
