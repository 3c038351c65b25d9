"""Report JSON determinism, figure rendering, and the feature CSV dump."""

import csv
import json

import numpy as np
import pytest

from ppgscreen.errors import MissingFileError, SchemaError
from ppgscreen.features import FeatureVector, vector_names
from ppgscreen.report import (
    load_report,
    render_figures,
    render_importances,
    report_bytes,
    write_feature_csv,
    write_report_json,
)


def small_report():
    """Two models, two folds, hand-sized curves."""
    def fold(auc):
        return {"metrics": {"AUC": auc},
                "roc_points": [[0.0, 0.0], [0.2, 0.7], [1.0, 1.0]]}

    names = [f"f{i}" for i in range(6)]
    imp = [0.01, 0.30, 0.02, 0.15, 0.0, 0.05]
    return {
        "schema_version": 1,
        "fold_plan": {"k": 2},
        "feature_names": names,
        "models": {
            "logreg": {"folds": [fold(0.9), fold(0.8)],
                       "aggregate": {"AUC": {"mean": 0.85, "std": 0.07}},
                       "importance_mean": imp},
            "gbt": {"folds": [fold(0.7), fold(0.75)],
                    "aggregate": {"AUC": {"mean": 0.725, "std": 0.035}},
                    "importance_mean": list(reversed(imp))},
        },
        "mean_cycle": {
            "grid": [-0.2, 0.0, 0.2, 0.4],
            "curves": {"0": [0.1, 1.0, 0.4, 0.2], "1": [0.2, 1.0, 0.5, 0.3]},
            "counts": {"0": 12, "1": 9},
        },
    }


def test_report_bytes_deterministic_across_key_order():
    a = {"b": 1, "a": {"y": 2, "x": 3}}
    b = {"a": {"x": 3, "y": 2}, "b": 1}
    assert report_bytes(a) == report_bytes(b)
    assert report_bytes(a).endswith(b"\n")


def test_write_and_load_round_trip(tmp_path):
    report = small_report()
    path = write_report_json(report, tmp_path)
    assert path.name == "report.json"
    assert load_report(path) == report


def test_load_report_missing(tmp_path):
    with pytest.raises(MissingFileError):
        load_report(tmp_path / "report.json")


def test_load_report_bad_json(tmp_path):
    path = tmp_path / "report.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError, match="not valid JSON"):
        load_report(path)


def test_load_report_missing_models(tmp_path):
    path = tmp_path / "report.json"
    path.write_text(json.dumps({"fold_plan": {"k": 2}}))
    with pytest.raises(SchemaError, match="models"):
        load_report(path)


def test_render_figures_produces_expected_files(tmp_path):
    paths = render_figures(small_report(), tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["importance.svg", "mean_cycle.svg", "roc_aggregate.svg",
                     "roc_fold1.svg", "roc_fold2.svg"]
    for p in paths:
        data = p.read_bytes()
        assert b"<svg" in data
        assert len(data) > 1000


def test_render_figures_byte_identical(tmp_path):
    report = small_report()
    first = {p.name: p.read_bytes()
             for p in render_figures(report, tmp_path / "a")}
    second = {p.name: p.read_bytes()
              for p in render_figures(report, tmp_path / "b")}
    assert first == second


def test_render_importances_skipped_when_absent(tmp_path):
    report = small_report()
    for entry in report["models"].values():
        entry["importance_mean"] = None
    assert render_importances(report, tmp_path) is None
    assert render_figures(report, tmp_path) != []
    assert not (tmp_path / "importance.svg").exists()


def test_feature_csv_layout(tmp_path):
    names = vector_names()
    rng = np.random.default_rng(5)
    vectors = [FeatureVector(subject_id=f"s{i:02d}",
                             values=rng.normal(size=len(names)),
                             label=i % 2)
               for i in range(4)]
    path = write_feature_csv(vectors, tmp_path / "features.csv")
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["subject_id", "label"] + names
    assert len(rows) == 5
    assert rows[1][0] == "s00"
    assert rows[2][1] == "1"
    values = np.array([float(v) for v in rows[3][2:]])
    np.testing.assert_array_equal(values, vectors[2].values)
