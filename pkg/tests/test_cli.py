"""End-to-end command line checks, run in process through main()."""

import csv
import json

import pytest

from ppgscreen.cli import main


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """A small noisy synthetic dataset shared by the run-based tests."""
    root = tmp_path_factory.mktemp("data")
    code = main(["synth", "--out", str(root), "--n-per-class", "8",
                 "--segments", "3", "--noise", "0.03", "--seed", "21"])
    assert code == 0
    return root


def run_args(dataset, out, *extra):
    return ["run", "--metadata", str(dataset / "subjects.csv"),
            "--signals", str(dataset / "signals"), "--out", str(out),
            "--set", "eval.compute_importance=false", *extra]


def test_synth_writes_identical_datasets(tmp_path):
    for sub in ("a", "b"):
        code = main(["synth", "--out", str(tmp_path / sub),
                     "--n-per-class", "3", "--seed", "4"])
        assert code == 0
    for name in ("subjects.csv", "truth.json"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes())
    sig_a = sorted((tmp_path / "a" / "signals").iterdir())
    sig_b = sorted((tmp_path / "b" / "signals").iterdir())
    assert [p.name for p in sig_a] == [p.name for p in sig_b]
    assert all(a.read_bytes() == b.read_bytes()
               for a, b in zip(sig_a, sig_b))


def test_run_produces_report_and_figures(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(run_args(dataset, out)) == 0
    report = json.loads((out / "report.json").read_text())
    assert set(report["models"]) == {"gbt", "logreg"}
    k = report["fold_plan"]["k"]
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert svgs == sorted([f"roc_fold{i + 1}.svg" for i in range(k)]
                          + ["roc_aggregate.svg", "mean_cycle.svg"])
    run_info = json.loads((out / "run_info.json").read_text())
    assert run_info["runtime_s"] > 0
    text = capsys.readouterr().out
    assert "AUC" in text and "report.json" in text


def test_run_is_deterministic(dataset, tmp_path):
    out = tmp_path / "out"
    assert main(run_args(dataset, out)) == 0
    first = (out / "report.json").read_bytes()
    first_svg = (out / "roc_aggregate.svg").read_bytes()
    assert main(run_args(dataset, out)) == 0
    assert (out / "report.json").read_bytes() == first
    assert (out / "roc_aggregate.svg").read_bytes() == first_svg


def test_report_subcommand_regenerates_figures(dataset, tmp_path):
    out = tmp_path / "out"
    assert main(run_args(dataset, out)) == 0
    originals = {p.name: p.read_bytes() for p in out.glob("*.svg")}
    redraw = tmp_path / "redraw"
    assert main(["report", "--report", str(out / "report.json"),
                 "--out", str(redraw)]) == 0
    regenerated = {p.name: p.read_bytes() for p in redraw.glob("*.svg")}
    assert regenerated == originals


def test_features_subcommand_csv(dataset, tmp_path):
    out = tmp_path / "out"
    assert main(["features", "--metadata", str(dataset / "subjects.csv"),
                 "--signals", str(dataset / "signals"),
                 "--out", str(out)]) == 0
    with (out / "features.csv").open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert len(rows[0]) == 112
    assert rows[0][:2] == ["subject_id", "label"]
    assert len(rows) > 16  # at least one cycle per subject
    float(rows[1][2])  # feature cells parse as numbers


def test_summarize_json(dataset, capsys):
    assert main(["summarize", "--metadata", str(dataset / "subjects.csv"),
                 "--signals", str(dataset / "signals"), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["diabetic"]["subjects"] == 8
    assert summary["non_diabetic"]["subjects"] == 8
    assert summary["diabetic"]["cycles"] > 0
    assert "mean" in summary["diabetic"]["age"]


def test_missing_metadata_exits_2(dataset, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--metadata", str(tmp_path / "absent.csv"),
                 "--signals", str(dataset / "signals"), "--out", str(out)])
    assert code == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["exit_code"] == 2
    assert "absent.csv" in record["message"]
    saved = json.loads((out / "error.json").read_text())
    assert saved["error"] == record["error"]


def test_too_few_subjects_exits_3(dataset, tmp_path):
    code = main(run_args(dataset, tmp_path / "out", "--k", "12"))
    assert code == 3


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "absent.toml"),
                 "--out", str(tmp_path / "out")])
    assert code == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["exit_code"] == 2


def test_bad_set_key_exits_4(dataset, tmp_path, capsys):
    code = main(run_args(dataset, tmp_path / "out", "--set", "nosuch.key=1"))
    assert code == 4
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "nosuch" in record["message"]


def test_flag_overrides_config_file(dataset, tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('[eval]\nk = 2\ncompute_importance = false\n')
    out = tmp_path / "out"
    assert main(["run", "--config", str(config),
                 "--metadata", str(dataset / "subjects.csv"),
                 "--signals", str(dataset / "signals"),
                 "--out", str(out), "--k", "3"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["fold_plan"]["k"] == 3
    assert report["config"]["eval"]["compute_importance"] is False


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
