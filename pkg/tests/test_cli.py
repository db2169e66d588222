import io
import json
import os
import re
import subprocess
import sys
from pathlib import Path

import pytest

from diffguide import FeatureVector, StateRecord, compute_difference, detect_threshold
from diffguide.cli import build_parser, main

from .helpers import gap_state, rstate

HERE = Path(__file__).resolve().parent
SCENARIOS = HERE.parent / "scenarios"
GOLDEN = HERE / "golden"

HELP_COMMANDS = [
    ["diff", "temporal"], ["diff", "latest"], ["diff", "spatial"], ["diff", "topn"],
    ["diff", "history"], ["diff", "external"], ["diff", "internal"], ["topn"], ["detect"],
    ["history", "add"], ["history", "relabel"], ["history", "list"], ["history", "ref"],
    ["history", "raw"], ["fuse"], ["eval", "run"], ["eval", "report"],
]


def run(argv, stdin="", monkeypatch=None):
    out = io.StringIO()
    if monkeypatch is not None:
        monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    code = main(argv, out)
    return code, out.getvalue()


def write_lines(path, items):
    path.write_text("".join(x.to_json() + "\n" for x in items))
    return str(path)


def test_diff_temporal_latest(tmp_path, monkeypatch):
    stream = [gap_state("t0", 0, 30), gap_state("t1", 1, 20), gap_state("t2", 2, 15)]
    f = write_lines(tmp_path / "stream.jsonl", stream)
    code, out = run(["diff", "temporal", "--in", f, "--latest"])
    assert code == 0 and len(out.splitlines()) == 1
    assert json.loads(out)["dims"][0]["value"] == -5
    code, out = run(["diff", "temporal"], "".join(s.to_json() + "\n" for s in stream), monkeypatch)
    assert [json.loads(ln)["dims"][0]["value"] for ln in out.splitlines()] == [-10, -5]
    assert run(["diff", "latest", "--in", f])[1] == run(["diff", "temporal", "--in", f, "--latest"])[1]


def test_diff_spatial_and_variability(tmp_path):
    f = write_lines(tmp_path / "subs.jsonl", [rstate(f"s{i}", f"R{i}", z)
                                              for i, z in enumerate([1, 3, 7])])
    code, out = run(["diff", "spatial", "--in", f])
    assert code == 0 and len(out.splitlines()) == 6
    code, out = run(["diff", "spatial", "--in", f, "--variability"])
    assert json.loads(out) == {"variability": 4.0, "m": 3, "norm": "L2"}


def test_topn_thin_delegation(tmp_path, monkeypatch):
    from diffguide import Difference, select_main_differences
    diffs = [Difference("a", "b", "temporal", FeatureVector.of(("x", v)), seq=i)
             for i, v in enumerate([5, 1, 3, 2])]
    feed = "".join(d.to_json() + "\n" for d in diffs)
    code, out = run(["topn", "-n", "2"], feed, monkeypatch)
    expected = "".join(d.to_json() + "\n" for d in select_main_differences(diffs, 2))
    assert code == 0 and out == expected
    assert run(["diff", "topn", "-n", "2"], feed, monkeypatch)[1] == expected


def test_detect_threshold_on_magnitude_15(monkeypatch):
    d = compute_difference(gap_state("t0", 0, 30), gap_state("t1", 1, 15))
    code, out = run(["detect", "--mode", "threshold", "--theta", "10"], d.to_json() + "\n",
                    monkeypatch)
    assert code == 0
    assert json.loads(out) == {"abnormal": True, "statistic": 15.0, "bound": 10.0,
                               "method": "threshold"}
    assert out == detect_threshold(d, 10.0).to_json() + "\n"


def test_history_cli_roundtrip(tmp_path, monkeypatch):
    h = str(tmp_path / "h.jsonl")
    for i, g in enumerate([30, 20, 16]):
        f = write_lines(tmp_path / f"s{i}.json", [gap_state(f"g{g}", i, g)])
        assert run(["history", "add", "--history", h, "--label", "normal", "--in", f])[0] == 0
    code, out = run(["history", "list", "--history", h])
    assert [json.loads(ln)["state"]["id"] for ln in out.splitlines()] == ["g30", "g20", "g16"]
    code, out = run(["history", "ref", "--history", h, "--strategy", "medoid"])
    assert json.loads(out)["id"] == "g20"
    q = write_lines(tmp_path / "q.json", [gap_state("q", 9, 15)])
    code, out = run(["detect", "--mode", "history", "--eta", "3", "--metric", "l2",
                     "--history", h, "--in", q])
    assert json.loads(out) == {"abnormal": False, "statistic": 1.0, "bound": 3.0,
                               "method": "history"}
    code, out = run(["diff", "history", "--history", h, "--strategy", "mean", "--in", q])
    assert json.loads(out)["dims"][0]["value"] == -7
    code, out = run(["history", "raw", "--history", h, "g20"])
    assert out == gap_state("g20", 1, 20).raw_ref.data.decode()
    code, _ = run(["history", "relabel", "--history", h, "g16", "--label", "abnormal"])
    assert code == 0
    code, out = run(["history", "list", "--history", h, "--all"])
    assert len(out.splitlines()) == 4


def test_fuse_and_external(tmp_path):
    from diffguide import EvidenceRecord
    ev = lambda t, v: EvidenceRecord("sensor", t, FeatureVector.of(("speed_kmh", v)))
    s0 = write_lines(tmp_path / "s0.json", [gap_state("s0", 0, 30)])
    s1 = write_lines(tmp_path / "s1.json", [gap_state("s1", 1, 15)])
    e0 = write_lines(tmp_path / "e0.json", [ev(0, 60)])
    e1 = write_lines(tmp_path / "e1.json", [ev(1, 80)])
    code, out = run(["fuse", "--state", s1, "--evidence", e1])
    assert [d["name"] for d in json.loads(out)["dims"]] == ["gap_m", "sensor.speed_kmh"]
    code, out = run(["diff", "external", "--state", s1, "--evidence", e1, "--prev", s0,
                     "--prev-evidence", e0])
    assert [d["value"] for d in json.loads(out)["dims"]] == [-15, 20]
    code, out = run(["diff", "internal", "--state", s1, "--prev", s0])
    assert json.loads(out)["dims"][0]["value"] == -15


def test_module_error_exit_1(tmp_path, capsys):
    f = write_lines(tmp_path / "one.jsonl", [gap_state("t0", 0, 30)])
    code, _ = run(["diff", "latest", "--in", f])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "insufficient_history"


def test_usage_error_exit_2(capsys):
    assert run(["diff"])[0] == 2
    assert run(["detect", "--mode", "bogus"])[0] == 2
    assert run(["history", "list"])[0] == 2
    err = capsys.readouterr().err
    assert '"error": "usage"' in err


def test_config_file_drives_commands(tmp_path, monkeypatch):
    (tmp_path / "run.toml").write_text(
        'norm = "L1"\nhistory = "hist.jsonl"\n[thresholds]\ntheta = 6.0\n'
        '[weights.safety]\nweights = { x0 = 10.0 }\n')
    cfg = str(tmp_path / "run.toml")
    d = compute_difference(StateRecord("a", FeatureVector.of(("x0", 1), ("x1", 4)), timestamp=0),
                           StateRecord("b", FeatureVector.of(("x0", 0), ("x1", 0)), timestamp=1))
    code, out = run(["detect", "--config", cfg, "--mode", "threshold"], d.to_json() + "\n",
                    monkeypatch)
    assert json.loads(out)["bound"] == 6.0
    assert run(["history", "list", "--config", cfg])[0] == 0
    (tmp_path / "bad.toml").write_text("nonsense = 1\n")
    assert run(["history", "list", "--config", str(tmp_path / "bad.toml")])[0] == 1


def test_eval_run_recorded_replay():
    code, out = run(["eval", "run", "--scenario", str(SCENARIOS / "temporal.toml"),
                     "--backend", "mock"])
    report = json.loads(out)
    assert code == 0
    assert report["methods"]["difference"]["mean"] == pytest.approx(0.5760, abs=1e-9)
    assert report["methods"]["difference"]["max_trial"] == 9
    assert report["reject_null"] is True


def test_eval_csv_and_report_from_trail(tmp_path):
    trail = str(tmp_path / "trail.jsonl")
    code, csv_out = run(["eval", "run", "--scenario", str(SCENARIOS / "spatial.toml"),
                         "--trail", trail, "--csv"])
    assert code == 0
    lines = csv_out.splitlines()
    assert lines[0] == "method,trial,similarity" and len(lines) == 41
    code, out = run(["eval", "report", "--trail", trail])
    assert json.loads(out)["methods"]["difference"]["mean"] == pytest.approx(0.6992, abs=1e-9)


def test_eval_hash_provider_and_trace(tmp_path):
    trace = tmp_path / "trace.jsonl"
    code, out = run(["eval", "run", "--scenario", str(SCENARIOS / "temporal.toml"),
                     "--provider", "hash", "-n", "5", "--trace", str(trace)])
    assert code == 0 and json.loads(out)["methods"]["direct"]["n"] == 5
    assert len(trace.read_text().splitlines()) == 10


def test_console_script_subprocess(tmp_path):
    d = compute_difference(gap_state("t0", 0, 30), gap_state("t1", 1, 15))
    proc = subprocess.run([sys.executable, "-m", "diffguide.cli", "detect", "--mode",
                           "threshold", "--theta", "10"], input=d.to_json() + "\n",
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["abnormal"] is True


def _help_text(cmd):
    parser = build_parser()
    buf = io.StringIO()
    sys_stdout = sys.stdout
    sys.stdout = buf
    try:
        with pytest.raises(SystemExit):
            parser.parse_args(cmd + ["--help"])
    finally:
        sys.stdout = sys_stdout
    return buf.getvalue()


@pytest.mark.parametrize("cmd", HELP_COMMANDS, ids=lambda c: "-".join(c))
def test_help_golden(cmd, monkeypatch):
    monkeypatch.setenv("COLUMNS", "100")
    text = _help_text(cmd)
    golden = GOLDEN / ("help_" + "_".join(cmd) + ".txt")
    if os.environ.get("DIFFGUIDE_UPDATE_GOLDEN"):
        golden.write_text(text)
    assert text == golden.read_text()
    # every registered flag is documented
    sub = build_parser()
    for name in cmd:
        sub = next(a for a in sub._actions if a.__class__.__name__ == "_SubParsersAction") \
            .choices[name]
    for action in sub._actions:
        for flag in action.option_strings:
            assert re.search(rf"(^|[\s,\[]){re.escape(flag)}\b", text), flag
