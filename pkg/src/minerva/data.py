"""Column-typed datasets and their CSV / sidecar serialization.

A dataset is a table of feature columns (categorical stored as int64 codes
in {0..m-1}, continuous as float64) plus one target column. On disk the
CSV header tags every column ``name:kind`` with kind one of ``cat``,
``float``, ``target_cat``, ``target_float``; categorical codes are written
1-based and shifted back on read. A JSON sidecar next to the CSV records
the generator spec, seed and ground-truth feature indices.

Feature indices on every public surface (sidecars, selections, reports)
are 1-based column positions; array indexing inside the package is 0-based.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CAT = "cat"
FLOAT = "float"
_FEATURE_KINDS = (CAT, FLOAT)
_TARGET_KINDS = ("target_cat", "target_float")


@dataclass
class Dataset:
    """In-memory table: typed feature columns plus a target."""

    names: list[str]
    kinds: list[str]                 # per feature: "cat" | "float"
    columns: list[np.ndarray]
    target: np.ndarray
    target_kind: str                 # "cat" | "float"
    target_name: str = "y"
    cat_cardinalities: dict[int, int] = field(default_factory=dict)  # 1-based idx -> m

    def __post_init__(self):
        if len(self.names) != len(self.kinds) or len(self.names) != len(self.columns):
            raise DataError("names, kinds and columns must align")
        if not self.columns:
            raise DataError("dataset has no feature columns")
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate feature names")
        n = len(self.columns[0])
        for name, kind, col in zip(self.names, self.kinds, self.columns):
            if kind not in _FEATURE_KINDS:
                raise DataError(f"column '{name}': unknown kind '{kind}'")
            if len(col) != n:
                raise DataError(f"column '{name}': length {len(col)} != {n}")
            if kind == CAT:
                if col.dtype != np.int64:
                    raise DataError(f"column '{name}': cat columns must be int64")
                if n and col.min() < 0:
                    raise DataError(f"column '{name}': negative category code")
            elif not np.all(np.isfinite(col)):
                raise DataError(f"column '{name}': non-finite values")
        if self.target_kind not in (CAT, FLOAT):
            raise DataError(f"unknown target kind '{self.target_kind}'")
        if len(self.target) != n:
            raise DataError("target length does not match feature columns")
        if self.target_kind == FLOAT and not np.all(np.isfinite(self.target)):
            raise DataError("target: non-finite values")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0])

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def cardinality(self, index: int) -> int:
        """Category count of 1-based feature `index` (recorded or inferred)."""
        if self.kinds[index - 1] != CAT:
            raise DataError(f"feature {index} is not categorical")
        if index in self.cat_cardinalities:
            return self.cat_cardinalities[index]
        return int(self.columns[index - 1].max()) + 1

    def target_arity(self) -> int:
        """1 for a continuous target, category count otherwise."""
        if self.target_kind == FLOAT:
            return 1
        return max(2, int(self.target.max()) + 1)

    def restrict(self, indices: list[int]) -> "Dataset":
        """New dataset keeping only the 1-based feature columns given."""
        for i in indices:
            if not 1 <= i <= self.n_features:
                raise DataError(f"feature index {i} out of range 1..{self.n_features}")
        cards = {}
        for new_pos, old in enumerate(indices, start=1):
            if old in self.cat_cardinalities:
                cards[new_pos] = self.cat_cardinalities[old]
        return Dataset(
            names=[self.names[i - 1] for i in indices],
            kinds=[self.kinds[i - 1] for i in indices],
            columns=[self.columns[i - 1].copy() for i in indices],
            target=self.target.copy(),
            target_kind=self.target_kind,
            target_name=self.target_name,
            cat_cardinalities=cards,
        )


def dataset_hash(ds: Dataset) -> str:
    """sha256 over a canonical little-endian serialization of the table."""
    h = hashlib.sha256()
    h.update(b"minerva-dataset-v1\0")
    for name, kind, col in zip(ds.names, ds.kinds, ds.columns):
        h.update(f"{name}:{kind}\0".encode())
        h.update(col.astype("<i8" if kind == CAT else "<f8").tobytes())
    h.update(f"{ds.target_name}:target_{ds.target_kind}\0".encode())
    h.update(ds.target.astype("<i8" if ds.target_kind == CAT else "<f8").tobytes())
    return h.hexdigest()


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def write_csv(ds: Dataset, path: str) -> None:
    """Write the dataset; categorical codes go out 1-based."""
    header = [f"{n}:{k}" for n, k in zip(ds.names, ds.kinds)]
    header.append(f"{ds.target_name}:target_{ds.target_kind}")
    cols_text = []
    for kind, col in zip(ds.kinds, ds.columns):
        if kind == CAT:
            cols_text.append([str(v + 1) for v in col.tolist()])
        else:
            cols_text.append([_format_float(v) for v in col.tolist()])
    if ds.target_kind == CAT:
        cols_text.append([str(v + 1) for v in ds.target.tolist()])
    else:
        cols_text.append([_format_float(v) for v in ds.target.tolist()])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols_text):
            fh.write(",".join(row) + "\n")


def read_csv(path: str) -> Dataset:
    """Read a dataset CSV; validates the header schema."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline().strip()
        if not header_line:
            raise DataError(f"{path}: empty file")
        tokens = header_line.split(",")
        names, kinds = [], []
        target_pos = None
        target_name, target_kind = None, None
        for pos, tok in enumerate(tokens):
            if ":" not in tok:
                raise DataError(f"{path}: header token '{tok}' lacks a :kind tag")
            name, kind = tok.rsplit(":", 1)
            if kind in _TARGET_KINDS:
                if target_pos is not None:
                    raise DataError(f"{path}: more than one target column")
                target_pos, target_name = pos, name
                target_kind = kind.removeprefix("target_")
            elif kind in _FEATURE_KINDS:
                names.append(name)
                kinds.append(kind)
            else:
                raise DataError(f"{path}: unknown column kind '{kind}'")
        if target_pos is None:
            raise DataError(f"{path}: no target column (need a target_cat/target_float kind)")

        raw_cols: list[list[str]] = [[] for _ in tokens]
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(tokens):
                raise DataError(f"{path}:{line_no}: expected {len(tokens)} fields, got {len(parts)}")
            for cell, bucket in zip(parts, raw_cols):
                bucket.append(cell)

    def parse(bucket: list[str], kind: str, name: str) -> np.ndarray:
        try:
            if kind == CAT:
                arr = np.array([int(v) for v in bucket], dtype=np.int64)
                if arr.size and arr.min() < 1:
                    raise DataError(f"{path}: column '{name}': category codes are 1-based on disk")
                return arr - 1
            return np.array([float(v) for v in bucket], dtype=np.float64)
        except ValueError as exc:
            raise DataError(f"{path}: column '{name}': {exc}") from None

    columns = []
    feat_i = 0
    for pos, tok in enumerate(tokens):
        if pos == target_pos:
            continue
        columns.append(parse(raw_cols[pos], kinds[feat_i], names[feat_i]))
        feat_i += 1
    target = parse(raw_cols[target_pos], target_kind, target_name)
    return Dataset(names=names, kinds=kinds, columns=columns,
                   target=target, target_kind=target_kind, target_name=target_name)


def sidecar_path(csv_path: str) -> str:
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def write_sidecar(csv_path: str, info: dict) -> None:
    with open(sidecar_path(csv_path), "w", encoding="utf-8") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(csv_path: str) -> dict | None:
    path = sidecar_path(csv_path)
    if not os.path.exists(path):
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
