import json

import pytest

from stayforge.cli import main


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    fast = ["--scale", "100", "--max-epochs", "3", "--patience", "2"]
    steps = [
        ["synth", "--out", d / "synth", "--rows", "240", "--continuous", "4", "--binary", "6", "--seed", "1"],
        ["preprocess", "--input", d / "synth/dataset", "--out", d / "pre"],
        ["split", "--input", d / "pre/dataset", "--out", d / "split", "--seed", "1"],
        ["sweep", "--train", d / "split/train", "--validation", d / "split/validation", "--out", d / "sweep",
         "--budget", "3", "--initial-random", "2", "--candidates", "20", "--strategy", "smote_nc", *fast],
        ["train", "--train", d / "split/train", "--validation", d / "split/validation", "--out", d / "model",
         "--config", d / "sweep/best.json", "--strategy", "smote_nc", *fast],
        ["evaluate", "--model", d / "model/model.npz", "--test", d / "split/test", "--out", d / "eval"],
        ["report", "--dataset", d / "split/train", "--out", d / "report", "--top-k", "5",
         "--run", f"smote_nc={d / 'eval'}", "--run", f"copy={d / 'eval'}"],
    ]
    for argv in steps:
        assert main([str(a) for a in argv]) == 0, argv
    return d


def test_outputs_present(pipeline_dir):
    d = pipeline_dir
    for rel in [
        "synth/dataset.csv", "synth/dataset.schema.json", "pre/preprocess_report.json",
        "split/train.csv", "split/validation.csv", "split/test.csv", "sweep/ledger.jsonl",
        "sweep/best.json", "model/model.npz", "eval/metrics.json", "eval/roc.csv",
        "eval/confusion.csv", "report/feature_importance.csv", "report/pca.svg", "report/roc.svg",
        "report/comparison.md", "report/manifest.json",
    ]:
        assert (d / rel).is_file(), rel


def test_ledger_and_metrics(pipeline_dir):
    lines = (pipeline_dir / "sweep/ledger.jsonl").read_text().splitlines()
    assert len(lines) == 3 and all("wall_time_s" not in line for line in lines)
    m = json.loads((pipeline_dir / "eval/metrics.json").read_text())
    assert set(m) >= {"f1", "accuracy", "precision", "recall", "auc", "tp", "fp", "fn", "tn"}
    assert (pipeline_dir / "eval/roc.csv").read_text().splitlines()[1].endswith(",inf")


def test_manifest(pipeline_dir):
    man = json.loads((pipeline_dir / "split/manifest.json").read_text())
    assert man["command"] == "split" and man["seed"] == 1
    assert any(k.endswith("dataset.csv") for k in man["inputs"])


def test_resample_command(pipeline_dir, tmp_path):
    out = tmp_path / "rs"
    assert main(["resample", "--input", str(pipeline_dir / "split/train"), "--out", str(out),
                 "--strategy", "random_undersample"]) == 0
    info = json.loads((out / "resample.json").read_text())
    assert info["negative"] == info["positive"]


def test_pivot_command(tmp_path):
    (tmp_path / "dx.csv").write_text("patient_id,code\np1,J18\np2,I10\np3,J18\np1,I10\n")
    (tmp_path / "enc.csv").write_text(
        "patient_id,admission,discharge\n"
        "p1,2021-01-01T00:00:00,2021-01-09T00:00:00\n"
        "p2,2021-02-01T00:00:00,2021-02-02T00:00:00\n"
        "p4,2021-02-01T00:00:00,2021-02-02T00:00:00\n"
    )
    out = tmp_path / "out"
    rc = main(["pivot", "--events", f"dx={tmp_path / 'dx.csv'}", "--encounters", str(tmp_path / "enc.csv"),
               "--out", str(out)])
    assert rc == 0
    lines = (out / "dataset.csv").read_text().splitlines()
    assert lines[0] == "row_id,encounter.day_of_year,encounter.ordinal_days,dx.I10,dx.J18,severe"
    assert [l.split(",")[0] for l in lines[1:]] == ["p1", "p2"]
    assert lines[1].endswith(",1")


def test_exit_codes(tmp_path, capsys):
    assert main(["preprocess", "--input", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 2
    assert main(["synth", "--rows", "3", "--ratio", "9", "--out", str(tmp_path / "o")]) == 1
    assert "InvalidSpecError" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["split", "--input", "x", "--test-fraction", "1.5"])
    assert exc.value.code == 2
