"""Statistics network: a scalar-valued critic over gated features and targets.

Layout per forward pass: each categorical feature is embedded and passed
through a soft clamp, each continuous feature enters raw; feature j's block
is then multiplied by the scalar gate p_j. The gated blocks are
concatenated, linearly projected to ``hidden_width``, the target lane
(raw real, or a width-4 embedding for categorical targets) is concatenated
after the projection, and the result runs through residual blocks
``h <- h + W2 relu(W1 h + b1) + b2`` before a linear scalar head.

The gate vector participates in the same tape as the weights, so one
backward pass yields gradients for both.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import ndgrad as ng
from .data import CAT, FLOAT, Dataset
from .errors import ConfigError, ContractError, DataError
from .ndgrad import Tensor
from .rng import Rng


def default_embed_dim(cardinality: int) -> int:
    return min(16, math.ceil(math.sqrt(cardinality)))


@dataclass
class NetworkSpec:
    """Architecture descriptor; parameter shapes are a pure function of it.

    `feature_kinds` records the dataset-order layout ("cat"/"float") so the
    gate vector p aligns with dataset feature indices.
    """

    feature_kinds: list[str]
    cat_cardinalities: list[int]          # one per cat feature, feature order
    target_arity: int                     # 1 => continuous target
    embed_dims: list[int] | None = None   # default: min(16, ceil(sqrt(card)))
    hidden_width: int = 64
    n_residual_blocks: int = 2
    clamp_bound: float = 5.0
    target_embed_dim: int = 4

    def __post_init__(self):
        n_cat = sum(1 for k in self.feature_kinds if k == CAT)
        if any(k not in (CAT, FLOAT) for k in self.feature_kinds):
            raise ConfigError(f"unknown feature kind in {self.feature_kinds}")
        if len(self.cat_cardinalities) != n_cat:
            raise ConfigError(
                f"{n_cat} categorical features but {len(self.cat_cardinalities)} cardinalities")
        if any(c < 2 for c in self.cat_cardinalities):
            raise ConfigError("categorical cardinalities must be at least 2")
        if self.embed_dims is None:
            self.embed_dims = [default_embed_dim(c) for c in self.cat_cardinalities]
        if len(self.embed_dims) != n_cat or any(e < 1 for e in self.embed_dims):
            raise ConfigError(f"need {n_cat} embedding widths of at least 1")
        if self.hidden_width < 1 or self.n_residual_blocks < 1:
            raise ConfigError("hidden_width and n_residual_blocks must be at least 1")
        if self.clamp_bound <= 0:
            raise ConfigError(f"clamp bound must be positive, got {self.clamp_bound}")
        if self.target_arity < 1 or self.target_embed_dim < 1:
            raise ConfigError("target arity and embedding width must be at least 1")

    @property
    def d(self) -> int:
        return len(self.feature_kinds)

    @property
    def n_float_features(self) -> int:
        return sum(1 for k in self.feature_kinds if k == FLOAT)

    def feature_widths(self) -> list[int]:
        """Concatenated block width contributed by each feature, dataset order."""
        widths = []
        cat_i = 0
        for kind in self.feature_kinds:
            if kind == CAT:
                widths.append(self.embed_dims[cat_i])
                cat_i += 1
            else:
                widths.append(1)
        return widths

    @property
    def concat_width(self) -> int:
        return sum(self.feature_widths())

    @property
    def y_width(self) -> int:
        return 1 if self.target_arity == 1 else self.target_embed_dim

    @property
    def block_width(self) -> int:
        return self.hidden_width + self.y_width

    def n_parameters(self) -> int:
        total = sum(c * e for c, e in zip(self.cat_cardinalities, self.embed_dims))
        if self.target_arity > 1:
            total += self.target_arity * self.target_embed_dim
        total += self.concat_width * self.hidden_width + self.hidden_width
        w = self.block_width
        total += self.n_residual_blocks * 2 * (w * w + w)
        total += w + 1
        return total

    def to_dict(self) -> dict:
        return {
            "feature_kinds": list(self.feature_kinds),
            "cat_cardinalities": list(self.cat_cardinalities),
            "target_arity": self.target_arity,
            "embed_dims": list(self.embed_dims),
            "hidden_width": self.hidden_width,
            "n_residual_blocks": self.n_residual_blocks,
            "clamp_bound": self.clamp_bound,
            "target_embed_dim": self.target_embed_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(**d)

    @classmethod
    def from_dataset(cls, ds: Dataset, **overrides) -> "NetworkSpec":
        cards = [ds.cardinality(j) for j in range(1, ds.n_features + 1)
                 if ds.kinds[j - 1] == CAT]
        return cls(feature_kinds=list(ds.kinds), cat_cardinalities=cards,
                   target_arity=ds.target_arity(), **overrides)


@dataclass
class StatNetParams:
    """Trainable tensors of one network instance, tied to its NetworkSpec."""

    spec: NetworkSpec
    embeddings: list[Tensor]
    target_embedding: Tensor | None
    proj_w: Tensor
    proj_b: Tensor
    blocks: list[tuple[Tensor, Tensor, Tensor, Tensor]]  # (w1, b1, w2, b2)
    head_w: Tensor
    head_b: Tensor

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = [(f"embed{i}", t) for i, t in enumerate(self.embeddings)]
        if self.target_embedding is not None:
            out.append(("target_embed", self.target_embedding))
        out += [("proj_w", self.proj_w), ("proj_b", self.proj_b)]
        for i, (w1, b1, w2, b2) in enumerate(self.blocks):
            out += [(f"block{i}_w1", w1), (f"block{i}_b1", b1),
                    (f"block{i}_w2", w2), (f"block{i}_b2", b2)]
        out += [("head_w", self.head_w), ("head_b", self.head_b)]
        return out

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_tensors()]

    def n_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def copy(self) -> "StatNetParams":
        def dup(t: Tensor) -> Tensor:
            return Tensor(t.data.copy(), requires_grad=True)
        return StatNetParams(
            spec=self.spec,
            embeddings=[dup(t) for t in self.embeddings],
            target_embedding=None if self.target_embedding is None
            else dup(self.target_embedding),
            proj_w=dup(self.proj_w), proj_b=dup(self.proj_b),
            blocks=[tuple(dup(t) for t in blk) for blk in self.blocks],
            head_w=dup(self.head_w), head_b=dup(self.head_b),
        )


def init_params(spec: NetworkSpec, seed: int) -> StatNetParams:
    """Glorot-uniform weights, zero biases; bit-deterministic in (spec, seed)."""
    rng = Rng(seed).derive("statnet-init")

    def glorot(fan_in: int, fan_out: int, shape: tuple) -> Tensor:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        u = rng.random_array(int(np.prod(shape)))
        return Tensor((2.0 * u - 1.0).reshape(shape) * limit, requires_grad=True)

    def zeros(shape: tuple) -> Tensor:
        return Tensor(np.zeros(shape), requires_grad=True)

    embeddings = [glorot(c, e, (c, e))
                  for c, e in zip(spec.cat_cardinalities, spec.embed_dims)]
    target_embedding = None
    if spec.target_arity > 1:
        target_embedding = glorot(spec.target_arity, spec.target_embed_dim,
                                  (spec.target_arity, spec.target_embed_dim))
    f_width, h = spec.concat_width, spec.hidden_width
    proj_w = glorot(f_width, h, (f_width, h))
    proj_b = zeros((h,))
    w = spec.block_width
    blocks = [(glorot(w, w, (w, w)), zeros((w,)), glorot(w, w, (w, w)), zeros((w,)))
              for _ in range(spec.n_residual_blocks)]
    head_w = glorot(w, 1, (w, 1))
    head_b = zeros((1,))
    return StatNetParams(spec=spec, embeddings=embeddings,
                         target_embedding=target_embedding,
                         proj_w=proj_w, proj_b=proj_b, blocks=blocks,
                         head_w=head_w, head_b=head_b)


def soft_clamp(x: Tensor, bound: float) -> Tensor:
    """Elementwise bound * tanh(x / bound): identity near 0, range (-bound, bound)."""
    if bound <= 0:
        raise ConfigError(f"clamp bound must be positive, got {bound}")
    return (x * (1.0 / bound)).tanh() * bound


def _gate_expansion(spec: NetworkSpec) -> np.ndarray:
    """0/1 matrix (d, concat_width) spreading p_j over feature j's block columns."""
    g = np.zeros((spec.d, spec.concat_width))
    col = 0
    for j, width in enumerate(spec.feature_widths()):
        g[j, col:col + width] = 1.0
        col += width
    return g


def forward(params: StatNetParams, p, x_cols: list[np.ndarray],
            y: np.ndarray) -> Tensor:
    """Score a batch: returns a (n, 1) tensor of critic values.

    `x_cols` are the raw feature columns in dataset order (int64 codes for
    categorical features); `p` is the length-d gate vector (Tensor or array).
    """
    spec = params.spec
    if len(x_cols) != spec.d:
        raise ContractError(f"expected {spec.d} feature columns, got {len(x_cols)}")
    if not isinstance(p, Tensor):
        p = Tensor(np.asarray(p, dtype=np.float64).reshape(1, -1))
    if p.size != spec.d:
        raise ContractError(f"gate vector has {p.size} entries for {spec.d} features")
    n = len(y)
    if n == 0 or any(len(c) != n for c in x_cols):
        raise ContractError("empty batch or feature/target length mismatch")

    blocks: list[Tensor] = []
    cat_i = 0
    for j, kind in enumerate(spec.feature_kinds):
        col = x_cols[j]
        if kind == CAT:
            card = spec.cat_cardinalities[cat_i]
            bad = (col < 0) | (col >= card)
            if bad.any():
                row = int(np.argmax(bad))
                raise DataError(
                    f"feature {j + 1}: category code {col[row]} out of range "
                    f"[0, {card}) at row {row}")
            blocks.append(soft_clamp(ng.gather_rows(params.embeddings[cat_i], col),
                                     spec.clamp_bound))
            cat_i += 1
        else:
            blocks.append(Tensor(np.asarray(col, dtype=np.float64).reshape(n, 1)))

    raw = ng.concat_columns(blocks)
    if p.data.ndim != 2:
        p = p.reshape(1, -1)
    gates = ng.matmul(p, Tensor(_gate_expansion(spec)))
    gated = raw * gates

    h = ng.matmul(gated, params.proj_w) + params.proj_b

    if spec.target_arity == 1:
        y_lane = Tensor(np.asarray(y, dtype=np.float64).reshape(n, 1))
    else:
        codes = np.asarray(y)
        bad = (codes < 0) | (codes >= spec.target_arity)
        if bad.any():
            row = int(np.argmax(bad))
            raise DataError(
                f"target: category code {codes[row]} out of range "
                f"[0, {spec.target_arity}) at row {row}")
        y_lane = ng.gather_rows(params.target_embedding, codes)

    h = ng.concat_columns([h, y_lane])
    for w1, b1, w2, b2 in params.blocks:
        inner = (ng.matmul(h, w1) + b1).relu()
        h = h + ng.matmul(inner, w2) + b2
    return ng.matmul(h, params.head_w) + params.head_b


def save_checkpoint(params: StatNetParams, path: str) -> None:
    """One JSON header line (spec + tensor offsets) then float64 LE payload."""
    tensors = params.named_tensors()
    offsets, off = [], 0
    for name, t in tensors:
        offsets.append({"name": name, "shape": list(t.data.shape), "offset": off})
        off += t.size
    header = {"format": "statnet-checkpoint-v1",
              "spec": params.spec.to_dict(),
              "tensors": offsets}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, t in tensors:
            fh.write(t.data.astype("<f8").tobytes())


def load_checkpoint(path: str) -> StatNetParams:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: bad checkpoint header: {exc}") from None
    if header.get("format") != "statnet-checkpoint-v1":
        raise DataError(f"{path}: not a checkpoint file")
    spec = NetworkSpec.from_dict(header["spec"])
    flat = np.frombuffer(blob, dtype="<f8")

    by_name = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        if start + size > flat.size:
            raise DataError(f"{path}: checkpoint payload truncated at '{entry['name']}'")
        by_name[entry["name"]] = Tensor(
            flat[start:start + size].reshape(shape).astype(np.float64),
            requires_grad=True)

    def take(name: str) -> Tensor:
        if name not in by_name:
            raise DataError(f"{path}: checkpoint missing tensor '{name}'")
        return by_name[name]

    n_cat = len(spec.cat_cardinalities)
    return StatNetParams(
        spec=spec,
        embeddings=[take(f"embed{i}") for i in range(n_cat)],
        target_embedding=take("target_embed") if spec.target_arity > 1 else None,
        proj_w=take("proj_w"), proj_b=take("proj_b"),
        blocks=[tuple(take(f"block{i}_{part}") for part in ("w1", "b1", "w2", "b2"))
                for i in range(spec.n_residual_blocks)],
        head_w=take("head_w"), head_b=take("head_b"),
    )
