import pytest

from minerva.errors import DataError
from minerva.reports import (
    collate,
    read_report,
    rows_to_text,
    validate_report,
    write_report,
)

HASH_A = "a" * 64
HASH_B = "b" * 64


def selection_report(method="minerva", seeds=(0,), digest=HASH_A):
    return {
        "schema_version": 1,
        "kind": "selection-report",
        "method": method,
        "dataset": {"path": "ds.csv", "hash": digest, "n_rows": 100,
                    "n_features": 4},
        "truth": [1, 2],
        "seeds": sorted(seeds),
        "config": {},
        "runs": [{"seed": s, "selected": [1, 2], "weights": [1.0, 1.0, 0.0, 0.0],
                  "mi_trace": [{"step": 0, "mi_nats": 0.1 * s}],
                  "classification": "Exact", "stage1_steps": 10,
                  "stage2_steps": 5} for s in sorted(seeds)],
        "meta": {"created_at": "2026-01-01T00:00:00+00:00"},
    }


def metrics_report(selected=(1, 2), digest=HASH_A):
    return {
        "schema_version": 1,
        "kind": "metrics-report",
        "dataset": {"path": "ds.csv", "hash": digest, "n_rows": 100,
                    "n_features": 4},
        "selected": list(selected),
        "regressor": {"kind": "knn", "k": 10, "train_fraction": 0.8, "seed": 0},
        "r2_in_sample": 0.9,
        "r2_out_of_sample": 0.85,
        "n_train": 80,
        "n_test": 20,
        "meta": {},
    }


def test_valid_reports_pass_validation():
    validate_report(selection_report())
    validate_report(metrics_report())


def test_validation_rejects_structural_drift():
    bad = selection_report()
    bad["schema_version"] = 2
    with pytest.raises(DataError):
        validate_report(bad)
    bad2 = selection_report()
    bad2["runs"][0]["classification"] = "Sorta"
    with pytest.raises(DataError):
        validate_report(bad2)
    bad3 = selection_report()
    bad3["extra"] = True
    with pytest.raises(DataError):
        validate_report(bad3)
    with pytest.raises(DataError):
        validate_report({"kind": "mystery"})


def test_write_refuses_invalid_reports(tmp_path):
    bad = selection_report()
    bad["method"] = "gradient-boosting"
    with pytest.raises(DataError):
        write_report(bad, str(tmp_path / "x.json"))
    assert not (tmp_path / "x.json").exists()


def test_roundtrip(tmp_path):
    path = str(tmp_path / "r.json")
    rep = selection_report(seeds=(0, 1, 2))
    write_report(rep, path)
    assert read_report(path) == rep


def test_collate_sorts_method_then_seed():
    rows = collate([selection_report("minerva", seeds=(1, 0)),
                    selection_report("ksg", seeds=(2,))])
    assert [(r["method"], r["seed"]) for r in rows] == \
        [("ksg", 2), ("minerva", 0), ("minerva", 1)]


def test_collate_attaches_matching_metrics():
    rows = collate([selection_report(), metrics_report(selected=(1, 2)),
                    metrics_report(selected=(3,))])
    assert rows[0]["r2_out_of_sample"] == 0.85
    rows_unmatched = collate([selection_report(), metrics_report(selected=(3,))])
    assert rows_unmatched[0]["r2_out_of_sample"] == ""


def test_collate_rejects_mixed_hashes_and_empty_input():
    with pytest.raises(DataError):
        collate([selection_report(digest=HASH_A),
                 selection_report(digest=HASH_B)])
    with pytest.raises(DataError):
        collate([])
    with pytest.raises(DataError):
        collate([metrics_report()])  # metrics alone make no table rows


def test_text_table_lists_all_rows():
    rows = collate([selection_report(seeds=(0, 1))])
    text = rows_to_text(rows)
    lines = text.splitlines()
    assert len(lines) == 4  # header, rule, two data rows
    assert lines[0].startswith("method")
