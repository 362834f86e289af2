"""Versioned JSON reports for selection runs and downstream metrics.

Every report is validated against its schema before it is written. All
content outside the `meta` key is a pure function of (dataset, config,
seeds), so reports are byte-reproducible; wall-clock facts live in `meta`
and are excluded from any comparison.
"""

from __future__ import annotations

import json
import os
from datetime import datetime, timezone

import jsonschema

from .data import Dataset, dataset_hash
from .errors import DataError

SCHEMA_VERSION = 1

_DATASET_BLOCK = {
    "type": "object",
    "required": ["path", "hash", "n_rows", "n_features"],
    "additionalProperties": False,
    "properties": {
        "path": {"type": "string"},
        "hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "n_rows": {"type": "integer", "minimum": 1},
        "n_features": {"type": "integer", "minimum": 1},
    },
}

_TRACE_POINT = {
    "type": "object",
    "required": ["step", "mi_nats"],
    "additionalProperties": False,
    "properties": {
        "step": {"type": "integer", "minimum": 0},
        "mi_nats": {"type": "number"},
    },
}

_RUN_BLOCK = {
    "type": "object",
    "required": ["seed", "selected", "weights", "mi_trace", "classification",
                 "stage1_steps", "stage2_steps"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "weights": {"type": "array", "items": {"type": "number"}},
        "mi_trace": {"type": "array", "items": _TRACE_POINT},
        "classification": {"type": ["string", "null"],
                           "enum": ["Exact", "NonExactTypeI", "NonExactTypeII", None]},
        "stage1_steps": {"type": "integer", "minimum": 0},
        "stage2_steps": {"type": "integer", "minimum": 0},
    },
}

SELECTION_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "method", "dataset", "truth", "seeds",
                 "config", "runs", "meta"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "selection-report"},
        "method": {"enum": ["minerva", "ksg"]},
        "dataset": _DATASET_BLOCK,
        "truth": {"type": ["array", "null"],
                  "items": {"type": "integer", "minimum": 1}},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "config": {"type": "object"},
        "runs": {"type": "array", "items": _RUN_BLOCK, "minItems": 1},
        "meta": {"type": "object"},
    },
}

METRICS_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "dataset", "selected", "regressor",
                 "r2_in_sample", "r2_out_of_sample", "n_train", "n_test", "meta"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "metrics-report"},
        "dataset": _DATASET_BLOCK,
        "selected": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "regressor": {
            "type": "object",
            "required": ["kind", "k", "train_fraction", "seed"],
            "additionalProperties": False,
            "properties": {
                "kind": {"const": "knn"},
                "k": {"type": "integer", "minimum": 1},
                "train_fraction": {"type": "number"},
                "seed": {"type": "integer"},
            },
        },
        "r2_in_sample": {"type": "number"},
        "r2_out_of_sample": {"type": "number"},
        "n_train": {"type": "integer", "minimum": 1},
        "n_test": {"type": "integer", "minimum": 1},
        "meta": {"type": "object"},
    },
}


def dataset_block(ds: Dataset, path: str) -> dict:
    return {"path": path, "hash": dataset_hash(ds),
            "n_rows": ds.n_rows, "n_features": ds.n_features}


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def validate_report(report: dict) -> None:
    """Schema-check a report dict; DataError on any violation."""
    kind = report.get("kind")
    schema = {"selection-report": SELECTION_REPORT_SCHEMA,
              "metrics-report": METRICS_REPORT_SCHEMA}.get(kind)
    if schema is None:
        raise DataError(f"unknown report kind {kind!r}")
    try:
        jsonschema.validate(report, schema)
    except jsonschema.ValidationError as exc:
        raise DataError(f"report fails schema validation: {exc.message}") from None


def write_report(report: dict, path: str) -> None:
    validate_report(report)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path: str) -> dict:
    if not os.path.exists(path):
        raise DataError(f"report not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not valid JSON: {exc}") from None
    validate_report(report)
    return report


def collate(reports: list[dict]) -> list[dict]:
    """Flatten selection reports to one row per (method, dataset, seed).

    All inputs must describe the same dataset (by content hash). Metrics
    reports contribute R^2 columns to rows whose selected set matches.
    """
    if not reports:
        raise DataError("no reports to collate")
    hashes = {r["dataset"]["hash"] for r in reports}
    if len(hashes) != 1:
        raise DataError(
            f"reports describe {len(hashes)} different datasets; refusing to merge")

    metrics = [r for r in reports if r["kind"] == "metrics-report"]
    rows = []
    for rep in reports:
        if rep["kind"] != "selection-report":
            continue
        for run in rep["runs"]:
            row = {
                "method": rep["method"],
                "dataset": rep["dataset"]["path"],
                "seed": run["seed"],
                "selected": " ".join(str(i) for i in run["selected"]),
                "classification": run["classification"] or "",
                "mi_final": (round(run["mi_trace"][-1]["mi_nats"], 6)
                             if run["mi_trace"] else ""),
                "stage1_steps": run["stage1_steps"],
                "stage2_steps": run["stage2_steps"],
                "r2_in_sample": "",
                "r2_out_of_sample": "",
            }
            for m in metrics:
                if m["selected"] == run["selected"]:
                    row["r2_in_sample"] = round(m["r2_in_sample"], 6)
                    row["r2_out_of_sample"] = round(m["r2_out_of_sample"], 6)
                    break
            rows.append(row)
    if not rows:
        raise DataError("no selection reports among inputs")
    rows.sort(key=lambda r: (r["method"], r["dataset"], r["seed"]))
    return rows


_COLUMNS = ["method", "dataset", "seed", "selected", "classification", "mi_final",
            "stage1_steps", "stage2_steps", "r2_in_sample", "r2_out_of_sample"]


def rows_to_csv(rows: list[dict], path: str) -> None:
    import csv
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


def rows_to_text(rows: list[dict]) -> str:
    cols = _COLUMNS
    table = [[str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(t[i]) for t in table)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for t in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(t, widths)))
    return "\n".join(lines)
