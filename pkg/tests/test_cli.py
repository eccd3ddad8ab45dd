import json
import subprocess
import sys

import pytest

from depscale.cli import main
from depscale.fusion import read_predictions
from depscale.pipeline import read_eval_summary

SMALL = ["--sessions", "20", "--duration", "20", "--k", "4",
         "--grid", "c=-1:3:2;g=-5:-1:2;k=rbf,linear", "--folds", "3"]


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    assert main(["pipeline", "--out", str(out), "--seed", "3", *SMALL]) == 0
    return out


def test_synth_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["synth", "--out", str(out), "--sessions", "3", "--duration", "5"]) == 0
    assert tree_bytes(a) == tree_bytes(b)
    assert (a / "corpus" / "manifest.json").is_file()


def test_pipeline_artifacts(small_run):
    out = small_run
    for rel in ("labels.csv", "models/gmm.json", "features/fisher.csv",
                "predictions/fused.csv", "reports/eval_summary.csv",
                "reports/weight_search.csv", "meta/train.json"):
        assert (out / rel).is_file(), rel
    for mod in ("head", "audio", "text", "stats", "blink", "fisher"):
        assert (out / "models" / f"{mod}_ensemble.json").is_file()
        pset = read_predictions(out / "predictions" / f"{mod}.csv")
        assert len(pset) == 20
        assert all(0 <= v <= 24 and float(v).is_integer() for v in pset.scores.values())
    fused = read_predictions(out / "predictions" / "fused.csv")
    assert all(0 <= v <= 24 for v in fused.scores.values())
    rows, _ = read_eval_summary(out / "reports" / "eval_summary.csv")
    assert rows[("fused", "all")]["n"] == 20
    assert all(r["rmse"] >= r["mae"] for r in rows.values())


def test_meta_records_seeds_and_versions(small_run):
    for stage in ("synth", "extract", "encode", "train", "predict", "fuse", "eval"):
        doc = json.loads((small_run / "meta" / f"{stage}.json").read_text())
        assert doc["seeds"]["root"] == 3
        assert {"manifest", "gmm", "ensemble"} <= set(doc["format_versions"])


def test_rerun_stage_is_byte_identical(small_run, capsys):
    before = tree_bytes(small_run / "reports")
    assert main(["eval", "--out", str(small_run), "--seed", "3", *SMALL]) == 0
    assert tree_bytes(small_run / "reports") == before
    assert "fused" in capsys.readouterr().out


def test_eval_session_mismatch(small_run, tmp_path, capsys):
    lines = (small_run / "predictions" / "fused.csv").read_text().splitlines()
    dropped = lines[-1].split(",")[0]
    bad = tmp_path / "fused.csv"
    bad.write_text("\n".join(lines[:-1] + ["ghost,3"]) + "\n")
    code = main(["eval", "--out", str(small_run), "--predictions", str(bad)])
    err = capsys.readouterr().err
    assert code == 3
    assert "symmetric difference" in err and "ghost" in err and dropped in err


def test_missing_manifest(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "manifest.json"
    assert main(["extract", "--out", str(tmp_path), "--manifest", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_stage_needs_previous_outputs(tmp_path):
    assert main(["train", "--out", str(tmp_path)]) == 2
    assert main(["predict", "--out", str(tmp_path)]) == 2


def test_invalid_values_exit_3(tmp_path, monkeypatch):
    assert main(["synth", "--out", str(tmp_path), "--seed", "-1"]) == 3
    assert main(["fuse", "--out", str(tmp_path), "--fusion", "median"]) == 3
    monkeypatch.setenv("DEPSCALE_SEED", "abc")
    assert main(["synth", "--out", str(tmp_path)]) == 3


def test_environment_override_and_flag_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("DEPSCALE_SEED", "11")
    monkeypatch.setenv("DEPSCALE_SESSIONS", "2")
    monkeypatch.setenv("DEPSCALE_DURATION", "4")
    assert main(["synth", "--out", str(tmp_path / "env")]) == 0
    doc = json.loads((tmp_path / "env" / "meta" / "synth.json").read_text())
    assert doc["seeds"]["root"] == 11 and doc["params"]["sessions"] == 2
    assert main(["synth", "--out", str(tmp_path / "flag"), "--seed", "5"]) == 0
    doc = json.loads((tmp_path / "flag" / "meta" / "synth.json").read_text())
    assert doc["seeds"]["root"] == 5


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "depscale", "synth", "--out", str(tmp_path),
                           "--sessions", "2", "--duration", "3"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "corpus written" in proc.stdout
