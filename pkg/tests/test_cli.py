import contextlib
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from maldyn.cli import main
from pipeline_helper import digests, run_pipeline

GOLDEN = Path(__file__).parent / "golden"
SUBCOMMANDS = ["synth", "parse", "featurize", "train", "eval", "transform", "cluster", "kscan", "gen-fit",
               "gen-sample", "coverage", "explain", "report"]


def quiet(argv):
    with contextlib.redirect_stdout(io.StringIO()) as out, contextlib.redirect_stderr(io.StringIO()) as err:
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    with contextlib.redirect_stdout(io.StringIO()):
        run_pipeline(d)
    return d


@pytest.fixture(scope="module")
def data(pipeline):
    return pipeline / "data"


def test_golden_digests(pipeline):
    want = json.loads((GOLDEN / "digests.json").read_text())
    got = digests(pipeline)
    assert got.keys() == want.keys()
    diff = [k for k in want if want[k] != got[k]]
    assert not diff, f"artifacts differ from golden run: {diff}"


def test_golden_metrics(pipeline):
    assert json.loads((pipeline / "eval" / "metrics.json").read_text()) == \
        json.loads((GOLDEN / "metrics.json").read_text())


def test_run_log_records(pipeline):
    lines = []
    for p in pipeline.rglob("runlog.jsonl"):
        lines += [json.loads(ln) for ln in p.read_text().splitlines()]
    assert {r["stage"] for r in lines} == set(SUBCOMMANDS)
    for r in lines:
        assert set(r) == {"stage", "duration_s", "seed", "inputs", "outputs"}
        assert r["seed"] == 42 and r["duration_s"] >= 0
        assert r["outputs"] and all(len(v) == 64 for v in r["outputs"].values())
        assert all(v is None or len(v) == 64 for v in r["inputs"].values())


def test_idempotent_rerun(pipeline, tmp_path):
    before = digests(pipeline)
    cfg = str(pipeline / "golden.cfg")
    m = str(pipeline / "data" / "manifest.csv")
    for argv in (["featurize", "--manifest", m, "--out", str(pipeline / "features")],
                 ["cluster", "--manifest", m, "--out", str(pipeline / "cluster")],
                 ["gen-sample", "--model", str(pipeline / "gen" / "model.json"), "--out",
                  str(pipeline / "gen" / "samples")]):
        assert quiet(argv + ["--config", cfg])[0] == 0
    assert digests(pipeline) == before


def test_coverage_smoke_inline_generation(data, tmp_path):
    out = tmp_path / "cov"
    code, stdout, _ = quiet(["coverage", "--manifest", str(data / "manifest.csv"), "--scheme", "7:1:1:1",
                             "--mode", "hybrid", "--n", "60", "--out", str(out)])
    assert code == 0
    assert (out / "coverage_hybrid.csv").exists() and (out / "coverage_hybrid.svg").exists()
    assert not (out / "coverage_text.csv").exists()
    assert "hybrid" in stdout


def test_coverage_manifest_from_config(data, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"paths.data_dir={data}\npaths.out_dir={tmp_path / 'o'}\ngenerate.n_samples=40\n"
                   "coverage.modes=text\n")
    assert quiet(["coverage", "--config", str(cfg)])[0] == 0
    assert (tmp_path / "o" / "coverage_text.csv").exists()


@pytest.mark.parametrize("argv", [
    ["bogus"],
    [],
    ["parse", "--manifest", "m.csv"],
    ["coverage", "--mode", "audio"],
    ["train", "--manifest", "m", "--features", "f", "--out", "o", "--jobs", "0"],
])
def test_usage_errors_exit_1(argv):
    code, _, err = quiet(argv)
    assert code == 1
    assert "usage" in err.lower() or "error" in err.lower()


def test_bad_config_exit_1(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gbdt.a.depth=3\n")
    code, _, err = quiet(["synth", "--out", str(tmp_path / "s"), "--config", str(cfg)])
    assert code == 1 and "unknown key" in err
    assert not (tmp_path / "s").exists()


def test_unknown_subcommand_via_entry_point():
    r = subprocess.run([sys.executable, "-m", "maldyn.cli", "bogus"], capture_output=True, text=True)
    assert r.returncode == 1 and "usage:" in r.stderr


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_per_subcommand(sub):
    code, out, _ = quiet([sub, "--help"])
    assert code == 0 and "usage:" in out


def test_data_errors_exit_2(pipeline, tmp_path):
    code, _, err = quiet(["eval", "--model", str(tmp_path / "none.json"), "--manifest",
                          str(pipeline / "data" / "manifest.csv"), "--features", str(pipeline / "features"),
                          "--out", str(tmp_path / "m.json")])
    assert code == 2 and "data error" in err
    code, _, err = quiet(["explain", "--model", str(pipeline / "model" / "model.json"), "--features",
                          str(pipeline / "features"), "--sample-id", "nope"])
    assert code == 2 and "nope" in err
    code, _, _ = quiet(["parse", "--manifest", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "p")])
    assert code == 2


def test_parse_strict_and_lenient(tmp_path):
    (tmp_path / "logs").mkdir()
    (tmp_path / "logs" / "good.xml").write_text(
        '<root><action api_name="A" call_name="x" call_pid="1" call_time="1"/></root>')
    (tmp_path / "logs" / "bad.xml").write_text("<root><action")
    (tmp_path / "manifest.csv").write_text(
        "sample_id,path,label,family,year\ngood,logs/good.xml,malware,,2012\nbad,logs/bad.xml,benign,,2013\n")
    code, _, err = quiet(["parse", "--manifest", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "o"),
                          "--strict"])
    assert code == 2 and "bad" in err
    code, _, _ = quiet(["parse", "--manifest", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "o")])
    assert code == 0
    rows = (tmp_path / "o" / "parsed.csv").read_text().splitlines()
    assert rows[1].startswith("good,1,1,ok") and rows[2].startswith("bad,0,0,\"error: [bad]")


def test_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("MALDYN_SEED", "7")
    assert quiet(["synth", "--out", str(tmp_path / "env"), "--n", "20"])[0] == 0
    monkeypatch.delenv("MALDYN_SEED")
    assert quiet(["synth", "--out", str(tmp_path / "flag"), "--n", "20", "--seed", "7"])[0] == 0
    assert quiet(["synth", "--out", str(tmp_path / "zero"), "--n", "20"])[0] == 0
    read = lambda name: (tmp_path / name / "manifest.csv").read_text()  # noqa: E731
    assert read("env") == read("flag") != read("zero")
    rec = json.loads((tmp_path / "env" / "runlog.jsonl").read_text())
    assert rec["seed"] == 7
    monkeypatch.setenv("MALDYN_SEED", "x")
    assert quiet(["synth", "--out", str(tmp_path / "bad"), "--n", "5"])[0] == 1


def test_seed_changes_artifacts(data, tmp_path):
    m = str(data / "manifest.csv")
    quiet(["gen-fit", "--manifest", m, "--out", str(tmp_path / "a.json"), "--seed", "1"])
    quiet(["gen-fit", "--manifest", m, "--out", str(tmp_path / "b.json"), "--seed", "2"])
    quiet(["gen-fit", "--manifest", m, "--out", str(tmp_path / "c.json"), "--seed", "1"])
    a, b, c = ((tmp_path / f"{x}.json").read_bytes() for x in "abc")
    assert a == c != b


def test_explicit_run_log(data, tmp_path):
    log = tmp_path / "logs" / "run.jsonl"
    quiet(["kscan", "--manifest", str(data / "manifest.csv"), "--out", str(tmp_path / "k"), "--k-list", "2,4",
           "--run-log", str(log)])
    quiet(["kscan", "--manifest", str(data / "manifest.csv"), "--out", str(tmp_path / "k"), "--k-list", "2,4",
           "--run-log", str(log)])
    recs = [json.loads(x) for x in log.read_text().splitlines()]
    assert len(recs) == 2 and recs[0]["outputs"] == recs[1]["outputs"]
    assert not (tmp_path / "k" / "runlog.jsonl").exists()
    assert (tmp_path / "k" / "kscan.csv").read_text().count("\n") == 3


def test_featurize_reference_aligns(pipeline, tmp_path):
    code, _, _ = quiet(["featurize", "--manifest", str(pipeline / "data" / "manifest.csv"), "--out",
                        str(tmp_path / "f"), "--reference", str(pipeline / "features")])
    assert code == 0
    assert (tmp_path / "f" / "feature_names.csv").read_bytes() == \
        (pipeline / "features" / "feature_names.csv").read_bytes()


def test_report_contents(pipeline):
    text = (pipeline / "report.md").read_text()
    assert "## Classification" in text and "## k scan" in text and "## Coverage" in text
