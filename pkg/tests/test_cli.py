import csv
import json

import pytest

from fimall.cli import main
from fimall.fixtures import fixture_path


def fx(name):
    return str(fixture_path(name))


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_valid_proof_passes(capsys):
    code, out = run(capsys, "check", "--validity", fx("hanoi.fim"))
    assert code == 0 and "PASS" in out


def test_invalid_proof_explains_cycle(capsys):
    code, out = run(capsys, "check", "--validity", "--explain", fx("hanoi_inf.fim"))
    assert code == 1
    assert "†4 → †" in out and "thread" in out


def test_validity_json_jobs(capsys):
    code, out = run(capsys, "validity", "--report", "json", "--jobs", "2", fx("nat_double.fim"), fx("stream_cut.fim"))
    rep = json.loads(out)
    assert code == 0 and rep["ok"]
    assert [f["verdicts"]["validity"] for f in rep["files"]] == [True, True]


def test_normalize_trace_lines(capsys):
    code, out = run(capsys, "normalize", fx("unit_cut.fim"), "--depth", "3", "--trace")
    assert code == 0
    events = [json.loads(x) for x in out.splitlines() if x.startswith("{")]
    assert events and all("kind" in e for e in events)
    assert "Cut" not in out.split("proof", 1)[1]


def test_guard_verdicts(capsys):
    code, out = run(capsys, "guard", "--report", "json", fx("pingpong.ssn"))
    rep = json.loads(out)["files"][0]
    assert code == 1
    assert rep["verdicts"] == {"Ping": False, "Pong": True, "PingPong": False}
    code, _ = run(capsys, "guard", fx("pingpong.ssn"), "--main", "Pong")
    assert code == 0


def test_typecheck_reports_span(tmp_path, capsys):
    bad = tmp_path / "bad.ssn"
    bad.write_text("type u =1 mu 1\nproc P : . |- (y : u) = close R ;\n")
    code, out = run(capsys, "typecheck", "--report", "json", str(bad))
    d = json.loads(out)["files"][0]["diagnostics"][0]
    assert code == 1 and d["span"]["line"] == 2


def test_run_writes_outputs(tmp_path, capsys):
    trace = tmp_path / "t.json"
    code, out = run(capsys, "run", fx("loop.ssn"), "--main", "LoopMain", "--budget", "20", "--trace-json", str(trace),
                    "--out-dir", str(tmp_path), "--report", "json")
    rep = json.loads(out)["files"][0]
    assert code == 0 and rep["outcome"] == "BudgetExhausted" and rep["external_receives"] == 0
    assert len(json.loads(trace.read_text())) == rep["sends"]
    rows = list(csv.DictReader((tmp_path / "loop.LoopMain.trace.csv").open()))
    assert len(rows) == rep["sends"]
    assert (tmp_path / "loop.LoopMain.trace.png").read_bytes()[:4] == b"\x89PNG"


def test_certify_pong(capsys):
    code, out = run(capsys, "certify", fx("pingpong.ssn"), "--main", "Pong")
    assert code == 0 and "agreement" in out


def test_certify_loop_fails(capsys):
    code, _ = run(capsys, "certify", fx("loop.ssn"), "--main", "Loop")
    assert code == 1


def test_certify_outputs(tmp_path, capsys):
    code, out = run(capsys, "certify", fx("closewait.ssn"), "--main", "CloseWait", "--normalize-depth", "4",
                    "--run-budget", "100", "--report", "json", "--out-dir", str(tmp_path))
    cert = json.loads(out)["files"][0]["certificate"]
    assert code == 0 and cert["runtime"] == "Empty" and cert["normalize"]["cut_free"]
    assert (tmp_path / "closewait.CloseWait.certify.png").exists()


def test_normalize_outputs(tmp_path, capsys):
    code, _ = run(capsys, "normalize", fx("stream_cut.fim"), "--depth", "4", "--out-dir", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "stream_cut.layers.csv").open()))
    assert [int(r["layer"]) for r in rows] == list(range(len(rows)))


@pytest.mark.parametrize("argv", [[], ["frob"], ["run", "x.ssn"], ["check", "missing.fim"],
                                  ["validity", "--jobs", "0", "x.fim"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2


def test_colour_toggle(monkeypatch, capsys):
    monkeypatch.setenv("FIMALL_COLOR", "1")
    _, out = run(capsys, "check", fx("unit_cut.fim"))
    assert "\x1b[32m" in out
    monkeypatch.setenv("FIMALL_COLOR", "0")
    _, out = run(capsys, "check", fx("unit_cut.fim"))
    assert "\x1b[" not in out
