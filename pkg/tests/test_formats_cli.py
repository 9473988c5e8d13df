import json

import pytest

from motorway_enforce.cli import main
from motorway_enforce.formats import FormatError, parse_action, parse_dyn, parse_gap, parse_interval, parse_scenario
from motorway_enforce.traffic import Claim, SetAcc, WithdrawReserve

from conftest import DATA


def record(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return out, json.loads(out[-1])


def test_parse_pieces():
    iv = parse_interval("(15, 21]")
    assert (iv.lo, iv.hi, iv.lo_closed, iv.hi_closed) == (15, 21, False, True)
    g = parse_gap("gap(A,B) in (15,21]")
    assert (g.rear, g.front, g.lo, g.hi) == ("A", "B", 15, 21)
    assert parse_gap("gap(A, B) >= 2").lo == 2
    assert parse_action("acc(B,1) @ 0") == (SetAcc("B", 1.0), 0.0)
    assert parse_action("c(A,2) @ 1.5") == (Claim("A", 2), 1.5)
    assert parse_action("wd_r(A,1) @ 3") == (WithdrawReserve("A", 1), 3.0)
    for bad in ("gap(A) = 1", "[1,2", "acc(B) @ 0"):
        with pytest.raises(FormatError):
            (parse_gap if bad.startswith("gap") else parse_interval if bad[0] == "[" else parse_action)(bad)


def test_scenario_errors_carry_line_numbers():
    with pytest.raises(FormatError, match="line 2"):
        parse_scenario("lanes 1\ncar A pos=x\n")
    with pytest.raises(FormatError, match="unknown section"):
        parse_scenario("lane 1\n")
    with pytest.raises(FormatError, match="required"):
        parse_scenario("car A pos=0 uncontrolled\n")
    with pytest.raises(FormatError):
        parse_dyn("car A pos=0 controllable\nbounds acc=-1,1 spd=0,13\nphase [1,2]\n")


def test_scenario_file():
    sc = parse_scenario((DATA / "catch_up.scn").read_text())
    assert sc.horizon == 5 and sc.uncontrolled == {"B"} and set(sc.specs) == {"A"}
    assert set(sc.atlas.ids) == {"P21", "P15"}


def test_enforce(capsys):
    assert main(["enforce", str(DATA / "catch_up.scn")]) == 0
    lines, rec = record(capsys)
    assert "verdict Enforced" in lines
    assert rec["command"] == "enforce" and rec["verdict"] == "Enforced"
    assert rec["outputs"]["final_gaps"]["A,B"] == pytest.approx(15, abs=1e-6)


def test_enforce_infeasible_exit_code(capsys):
    assert main(["enforce", str(DATA / "deadline.scn")]) == 2
    _, rec = record(capsys)
    assert rec["outputs"]["fallback_ok"] is True


def test_solve_dyn(capsys):
    assert main(["solve-dyn", str(DATA / "catch_up.dyn")]) == 0
    lines, rec = record(capsys)
    assert rec["verdict"] == "feasible" and rec["outputs"]["verified"] is True
    assert any(line.startswith("schedule") for line in lines)


def test_solve_dyn_oracle(capsys):
    assert main(["solve-dyn", str(DATA / "catch_up.dyn"), "--oracle"]) == 0
    _, rec = record(capsys)
    assert rec["outputs"]["tried"] > 0


def test_check(capsys):
    assert main(["check", str(DATA / "m.seq"), "P21 -> next[=5] P15"]) == 0
    assert main(["check", str(DATA / "m_late.seq"), "P21 -> next[=5] P15"]) == 2
    assert main(["check", str(DATA / "m_late.seq"), "P21 -> next[=5] P15", "--t", "4"]) == 0


def test_regions(capsys, tmp_path):
    dump = tmp_path / "r.txt"
    assert main(["regions", "P21 -> next[=5] P15", "--dump", str(dump)]) == 0
    lines, rec = record(capsys)
    assert "non-empty" in lines and dump.read_text()
    assert {c["name"]: c["regions"] for c in rec["outputs"]["clocks"]}["tick"] == 4
    assert main(["regions", "p & !p"]) == 2


def test_errors_exit_one(capsys, tmp_path):
    assert main(["enforce", str(tmp_path / "missing.scn")]) == 1
    bad = tmp_path / "bad.dyn"
    bad.write_text("car A\n")
    assert main(["solve-dyn", str(bad)]) == 1
    assert main(["check", str(DATA / "m.seq"), "p U"]) == 1
    assert "error:" in capsys.readouterr().err


def test_tolerance_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("MOTORWAY_ENFORCE_TOLERANCE", "1e-7")
    main(["check", str(DATA / "m.seq"), "true"])
    _, rec = record(capsys)
    assert rec["tolerance"] == 1e-7


def test_log_file(tmp_path, capsys):
    log = tmp_path / "run.log"
    main(["--log", str(log), "enforce", str(DATA / "trivial.scn")])
    assert "q2->q3" in log.read_text()
