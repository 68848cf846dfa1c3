"""CLI: exit codes, output shapes, and the generate-then-check loop."""

import io
import json
import subprocess
import sys

import pytest

from atomcheck import dump_trace, paper_fixture, parse_trace
from atomcheck.cli import main


@pytest.fixture
def fixture_file(tmp_path):
    def _write(name):
        p = tmp_path / f"{name}.txt"
        dump_trace(paper_fixture(name), p)
        return str(p)

    return _write


def test_clean_trace_exits_zero(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma1")])
    assert rc == 0
    assert "clean" in capsys.readouterr().out


def test_violating_trace_exits_one(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma3")])
    assert rc == 1
    out = capsys.readouterr().out
    assert "conflict-serializability" in out
    assert "at event 11" in out


def test_check_json_shape(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma4"), "--mode", "both", "--json"])
    assert rc == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["threads"] == 3
    assert doc["n"] == 12
    modes = {c["mode"]: c for c in doc["checks"]}
    assert set(modes) == {"cs", "inc"}
    cs = modes["cs"]["violation"]
    assert cs["pos"] == 11
    assert cs["source"] == {"thread": "T2", "txn": 1}
    assert cs["target"] == {"thread": "T0", "txn": 1}
    inc = modes["inc"]["violation"]
    assert inc["pos"] == 11
    assert inc["source"] == {"thread": "T2", "event_seq": 3}
    assert inc["target"] == {"thread": "T0", "event_seq": 3}
    assert inc["blamed"] == {"thread": "T0", "txn": 1}


def test_check_inc_mode_clean_on_cs_only_trace(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma3"), "--mode", "inc"])
    assert rc == 0
    assert "clean" in capsys.readouterr().out


def test_check_sequenced_monitor_matches_offline(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma3"), "--monitor", "sequenced", "--json"])
    assert rc == 1
    doc = json.loads(capsys.readouterr().out)
    v = doc["checks"][0]["violation"]
    assert v is not None and v["pos"] == 11


def test_check_free_monitor_reports_realized_run(fixture_file, capsys):
    # free scheduling may or may not reproduce the input's violation;
    # the exit code must agree with the reported verdict either way
    rc = main(["check", fixture_file("sigma3"), "--monitor", "free", "--json"])
    doc = json.loads(capsys.readouterr().out)
    check = doc["checks"][0]
    assert "realized_events" in check
    assert rc == (1 if check["violation"] is not None else 0)


def test_inc_mode_refuses_concurrent_monitor(fixture_file, capsys):
    rc = main(["check", fixture_file("sigma4"), "--mode", "inc", "--monitor", "free"])
    assert rc == 2
    assert "cs mode only" in capsys.readouterr().err


def test_stdin_dash(monkeypatch, capsys):
    text = "T0|b\nT0|w|x\nT0|e\n"
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    rc = main(["check", "-"])
    assert rc == 0


def test_missing_file_exits_two(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["check", str(tmp_path / "nope.txt")])
    assert exc.value.code == 2
    assert "no such file" in capsys.readouterr().err


def test_malformed_file_exits_two(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("T0|b\nT0|zap|q\n")
    with pytest.raises(SystemExit) as exc:
        main(["check", str(p)])
    assert exc.value.code == 2
    assert "line 2" in capsys.readouterr().err


def test_oracle_command(fixture_file, capsys):
    rc = main(["oracle", fixture_file("sigma3")])
    assert rc == 1
    assert "violation at event 11" in capsys.readouterr().out

    rc = main(["oracle", fixture_file("sigma1"), "--mode", "both", "--json"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert [c["first_violation_pos"] for c in doc["checks"]] == [None, None]


def test_gen_random_then_check_round_trip(tmp_path, capsys):
    out = tmp_path / "t.txt"
    rc = main(
        ["gen", "random", "--n", "120", "--threads", "3", "--seed", "7", "--out", str(out)]
    )
    assert rc == 0
    t = parse_trace(out.read_text())
    assert t.n == 120
    rc2 = main(["check", str(out)])
    assert rc2 in (0, 1)


def test_gen_to_stdout_parses(capsys):
    rc = main(["gen", "velodrome", "--j", "5"])
    assert rc == 0
    t = parse_trace(capsys.readouterr().out)
    assert t.n == 22


def test_gen_fixture_matches_packaged(capsys):
    rc = main(["gen", "fixture", "--name", "sigma7"])
    assert rc == 0
    assert parse_trace(capsys.readouterr().out) == paper_fixture("sigma7")


def test_gen_fixture_unknown_name(capsys):
    rc = main(["gen", "fixture", "--name", "sigma0"])
    assert rc == 2
    assert "unknown fixture" in capsys.readouterr().err


def test_gen_space_reports_instance_on_stderr(capsys):
    rc = main(["gen", "space", "--universe", "12", "--seed", "3"])
    assert rc == 0
    captured = capsys.readouterr()
    assert "members=" in captured.err and "probe=" in captured.err
    assert parse_trace(captured.out).n > 0


def test_bench_csv(capsys):
    rc = main(["bench", "--sizes", "2000,4000", "--csv", "--threads", "4"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "family,mode,size,events,seconds,ca_calls"
    assert len(lines) == 3
    for row in lines[1:]:
        fam, mode, size, events, secs, ca = row.split(",")
        assert fam == "synced" and mode == "cs"
        assert int(size) == int(events)
        assert float(secs) > 0
        assert int(ca) > 0


def test_bench_velodrome(capsys):
    rc = main(["bench", "--family", "velodrome", "--sizes", "50,100"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "velodrome" in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "atomcheck" in capsys.readouterr().out


def test_installed_entry_point(fixture_file):
    proc = subprocess.run(
        ["atomcheck", "check", fixture_file("sigma9"), "--mode", "both", "--json"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 1, proc.stderr
    doc = json.loads(proc.stdout)
    assert {c["mode"] for c in doc["checks"]} == {"cs", "inc"}
