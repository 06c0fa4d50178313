import math
import json
import shutil
import subprocess
import sys

import jsonschema
import pytest

from conftest import grid_city
from roadmetrics.cli import main
from roadmetrics.graph import GeoGraph, components, read_graph, write_graph
from roadmetrics.report import load_schema
from roadmetrics.synth import synthetic_city

FAST = ["--set", "path.n_pairs=100", "--set", "subgraph.n_starts=60"]


def validate(path, name):
    doc = json.loads(path.read_text(encoding="utf-8"))
    jsonschema.Draft202012Validator(load_schema(name)).validate(doc)
    return doc


@pytest.fixture
def city(tmp_path):
    p = tmp_path / "city.json"
    write_graph(grid_city(4, 4, block=150), p)
    return p


@pytest.fixture
def town(tmp_path):
    p = tmp_path / "town.json"
    write_graph(synthetic_city(0), p)
    return p


def test_score_identity(tmp_path, city):
    out = tmp_path / "r.json"
    assert main(["score", str(city), str(city), "-o", str(out), *FAST]) == 0
    doc = validate(out, "report")
    assert all(v >= 0.98 for v in doc["summary"].values())
    assert doc["metrics"]["junct"]["f_error"] == 0
    assert (tmp_path / "r.timing.json").exists()


def test_score_is_byte_identical(tmp_path, city):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["--seed", "4", "score", str(city), str(city), "-o", str(a), *FAST]) == 0
    assert main(["score", str(city), str(city), "-o", str(b), "--seed", "4", *FAST]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_score_empty_prediction(tmp_path, city):
    empty = tmp_path / "empty.json"
    write_graph(GeoGraph({}, []), empty)
    out = tmp_path / "r.json"
    assert main(["score", str(city), str(empty), "-o", str(out), *FAST]) == 0
    doc = validate(out, "report")
    assert doc["metrics"]["ccq"] == {"correctness": 0.0, "completeness": 0.0, "quality": 0.0}
    for name in ("graph", "newp", "newj", "newg"):
        assert doc["metrics"][name]["recall"] == 0


def test_score_csv_and_dumps(tmp_path, city):
    out, csv, dump = tmp_path / "r.json", tmp_path / "scores.csv", tmp_path / "dump"
    for _ in range(2):
        assert main(["score", str(city), str(city), "-o", str(out), "--csv", str(csv), "--dump-dir", str(dump),
                     "-m", "ccq,newj,graph,newg", *FAST]) == 0
    lines = csv.read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("ccq.completeness")
    names = sorted(p.name for p in dump.iterdir())
    assert names == ["ccq_gt.png", "ccq_pred.png", "graph_iterations.jsonl", "newg_iterations.jsonl", "newj_matches.json"]
    rows = (dump / "newg_iterations.jsonl").read_text().splitlines()
    assert len(rows) == 60 and {"seed_graph", "start", "matched"} <= json.loads(rows[0]).keys()


@pytest.mark.parametrize("content", ['{"nodes": [', '{"nodes":[{"id":0,"x":0,"y":0}],"edges":[[0,3]]}'])
def test_bad_input_exits_2(tmp_path, city, content, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(content)
    assert main(["score", str(city), str(bad), "-o", str(tmp_path / "r.json")]) == 2
    assert "bad.json" in capsys.readouterr().err


def test_missing_file_exits_2(tmp_path, city):
    assert main(["score", str(city), str(tmp_path / "nope.json"), "-o", str(tmp_path / "r.json")]) == 2


@pytest.mark.parametrize("extra", [["-m", "ccq,iou"], ["--set", "path.n_pairs"], ["--set", "path.bogus=1"]])
def test_bad_options_exit_2(tmp_path, city, extra):
    assert main(["score", str(city), str(city), "-o", str(tmp_path / "r.json"), *extra]) == 2


def test_metric_failure_exits_3(tmp_path, city):
    empty = tmp_path / "empty.json"
    write_graph(GeoGraph({}, []), empty)
    out = tmp_path / "r.json"
    assert main(["score", str(empty), str(city), "-o", str(out), "-m", "graph,newj", *FAST]) == 3
    doc = validate(out, "report")
    assert "graph" in doc["errors"] and "newj" in doc["metrics"]


def test_config_file_and_flag_precedence(tmp_path, city):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('seed = 7\nmetrics = ["apls", "newj"]\n[path]\nn_pairs = 50\n[junction]\nd_max = 20.0\n')
    out = tmp_path / "r.json"
    assert main(["--config", str(cfg), "score", str(city), str(city), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["settings"]["seed"] == 7 and doc["settings"]["path"]["n_pairs"] == 50
    assert doc["settings"]["junction"]["d_max"] == 20.0
    assert sorted(doc["metrics"]) == ["apls", "newj"]
    assert main(["--config", str(cfg), "--seed", "8", "score", str(city), str(city), "-o", str(out),
                 "--set", "path.n_pairs=60"]) == 0
    doc = json.loads(out.read_text())
    assert doc["settings"]["seed"] == 8 and doc["settings"]["path"]["n_pairs"] == 60


def test_json_config(tmp_path, city):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 2, "ccq": {"slack": 2}}))
    out = tmp_path / "r.json"
    assert main(["--config", str(cfg), "score", str(city), str(city), "-o", str(out), "-m", "ccq"]) == 0
    assert json.loads(out.read_text())["settings"]["ccq"]["slack"] == 2


def test_bad_config_exits_2(tmp_path, city):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("seed = = 1")
    assert main(["--config", str(cfg), "score", str(city), str(city), "-o", str(tmp_path / "r.json")]) == 2


# --------------------------------------------------------------------------
# perturb
# --------------------------------------------------------------------------

def test_perturb_zero_is_identity(tmp_path, town):
    gt, pred = tmp_path / "gt.json", tmp_path / "pred.json"
    assert main(["perturb", str(town), "--kind", "doubled_pred", "--severity", "0",
                 "--out-gt", str(gt), "--out-pred", str(pred), "--seed", "3"]) == 0
    assert gt.read_bytes() == pred.read_bytes() == town.read_bytes()
    man = validate(tmp_path / "pred.manifest.json", "manifest")
    assert man["spec"]["seed"] == 3 and man["achieved"] == 0


def test_perturb_interruptions_components(tmp_path, town):
    gt, pred, man = tmp_path / "gt.json", tmp_path / "pred.json", tmp_path / "m.json"
    assert main(["perturb", str(town), "--kind", "interruptions", "--severity", "20",
                 "--out-gt", str(gt), "--out-pred", str(pred), "--manifest", str(man), "--seed", "1"]) == 0
    doc = validate(man, "manifest")
    before = len(components(read_graph(town)))
    after = len(components(read_graph(pred)))
    diag = doc["diagnostics"]
    assert (diag["components_before"], diag["components_after"]) == (before, after)
    # every requested break that did not add a component is accounted for
    assert after - before >= 20 or doc["achieved"] < 20 or after - before + diag["breaks_on_cycles"] == 20


def test_perturb_round_trips_through_score(tmp_path, town):
    gt, pred = tmp_path / "gt.json", tmp_path / "pred.json"
    assert main(["perturb", str(town), "--kind", "far_false_positives", "--severity", "0.3", "--disk-radius", "640",
                 "--out-gt", str(gt), "--out-pred", str(pred)]) == 0
    man = json.loads((tmp_path / "pred.manifest.json").read_text())
    assert man["spec"]["disk_radius"] == 640 and man["achieved"] >= 0.3
    assert pred.read_bytes() == town.read_bytes()
    out = tmp_path / "r.json"
    assert main(["score", str(gt), str(pred), "-o", str(out), "-m", "newg,graph", *FAST]) == 0
    s = json.loads(out.read_text())["metrics"]
    assert s["newg"]["precision"] < 0.9 and s["graph"]["precision"] == 1.0


def test_perturb_bad_spec_exits_2(tmp_path, town):
    assert main(["perturb", str(town), "--kind", "interruptions", "--severity", "2.5",
                 "--out-gt", str(tmp_path / "a.json"), "--out-pred", str(tmp_path / "b.json")]) == 2


# --------------------------------------------------------------------------
# sweep and correlate
# --------------------------------------------------------------------------

def test_sweep_outputs(tmp_path, city):
    out = tmp_path / "sw.json"
    args = ["sweep", str(city), "--kind", "node_noise", "--grid", "0,3", "--seeds", "2", "-m", "apls,newj", "-o", str(out), *FAST]
    assert main(args) == 0
    doc = validate(out, "sweep")
    assert doc["curves"]["apls"]["score"][0] == 1.0 and len(doc["cells"]) == 4
    csv = (tmp_path / "sw.newj.csv").read_text().splitlines()
    assert csv[0] == "severity,seed,metric,component,value" and len(csv) == 1 + 4 * 6
    first = out.read_bytes()
    assert main(args + ["--threads", "2"]) == 0
    assert out.read_bytes() == first


def test_sweep_from_config(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('metrics = "newj"\n[sweep]\nkind = "interruptions"\ngrid = [0, 5]\nseeds = 1\n')
    out = tmp_path / "sw.json"
    assert main(["--config", str(cfg), "sweep", "--synthetic", "1", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "interruptions" and doc["grid"] == [0.0, 5.0] and doc["n_seeds"] == 1
    assert doc["curves"]["newj"]["recall"][1] < 1.0


@pytest.mark.parametrize("extra", [["--grid", "3,1"], ["--grid", ""], ["--grid", "a,b"]])
def test_sweep_bad_grid(tmp_path, city, extra):
    assert main(["sweep", str(city), "--kind", "interruptions", *extra, "-o", str(tmp_path / "s.json")]) == 2


def test_sweep_needs_inputs(tmp_path):
    assert main(["sweep", "--kind", "interruptions", "--grid", "0", "-o", str(tmp_path / "s.json")]) == 2


def _report(path, summary):
    path.write_text(json.dumps({"format": "roadmetrics.score/1", "summary": summary}))


def test_correlate(tmp_path, city):
    reports = tmp_path / "reports"
    reports.mkdir()
    for i, v in enumerate([0.2, 0.5, 0.4, 0.9]):
        _report(reports / f"r{i}.json", {"apls": v, "newp": v, "newj": 1 - v, "newg": 0.3})
    (reports / "r0.timing.json").write_text('{"wall_seconds": {}}')
    out = tmp_path / "corr.json"
    assert main(["correlate", str(reports), "-m", "apls,newp,newj,newg", "-o", str(out)]) == 0
    doc = validate(out, "correlation")
    assert doc["n"] == 4
    m = doc["matrix"]
    assert m[0][1] == 1.0 and math.isclose(m[0][2], -1.0) and m[0][3] is None and m[3][3] is None


def test_correlate_duplicates_are_null(tmp_path, city):
    reports = tmp_path / "reports"
    reports.mkdir()
    src = tmp_path / "r.json"
    assert main(["score", str(city), str(city), "-o", str(src), "-m", "apls,newj", *FAST]) == 0
    for i in range(5):
        shutil.copy(src, reports / f"r{i}.json")
    out = tmp_path / "corr.json"
    assert main(["correlate", str(reports), "-m", "apls,newj", "-o", str(out)]) == 0
    assert "NaN" not in out.read_text()
    assert validate(out, "correlation")["matrix"] == [[None, None], [None, None]]


def test_correlate_too_few(tmp_path):
    reports = tmp_path / "reports"
    reports.mkdir()
    for i in range(2):
        _report(reports / f"r{i}.json", {"apls": i / 2, "newp": i / 3})
    assert main(["correlate", str(reports), "-m", "apls,newp", "-o", str(tmp_path / "c.json")]) == 2


def test_console_script(tmp_path, city):
    out = tmp_path / "r.json"
    exe = shutil.which("roadmetrics")
    cmd = [exe] if exe else [sys.executable, "-m", "roadmetrics.cli"]
    res = subprocess.run(cmd + ["score", str(city), str(city), "-m", "apls", "-o", str(out)], capture_output=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run(cmd + ["score", str(city), str(tmp_path / "missing.json"), "-o", str(out)], capture_output=True)
    assert res.returncode == 2 and b"error" in res.stderr
