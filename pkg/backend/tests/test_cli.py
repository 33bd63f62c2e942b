"""
Tests for the command-line driver.
"""
import json

import pytest

from app.cli import EXIT_OK, EXIT_USAGE, build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_bundled_problem(capsys):
    code, out, _ = run(capsys, "validate", "qp")
    assert code == EXIT_OK
    body = json.loads(out)
    assert body == {"bilevel": False, "m": 2, "n": 1, "name": "ex_qp", "valid": True, "warnings": []}


def test_validate_reports_malformed_file(capsys, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "broken",\n "dims": }')
    code, out, err = run(capsys, "validate", str(path))
    assert code == EXIT_USAGE
    assert out == ""
    assert "problem_file_error" in err
    assert "line 2" in err


def test_validate_warns_on_stderr(capsys, tmp_path):
    path = tmp_path / "free.json"
    path.write_text(json.dumps({"name": "free", "dims": {"n": 0, "m": 1}, "lower": {"objective": "y1^2"}}))
    code, out, err = run(capsys, "validate", str(path))
    assert code == EXIT_OK
    assert "whole space" in err
    assert json.loads(out)["warnings"]


def test_check_cq_prints_run_report(capsys):
    code, out, _ = run(capsys, "check-cq", "halfspace", "--point", "origin", "--cq", "licq", "--samples", "10")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["payload"]["verdict"] == "holds"
    assert report["payload"]["cq_name"] == "licq"
    assert report["seed"] == 42
    assert len(report["input_digest"]) == 64


def test_point_is_required(capsys):
    code, _, err = run(capsys, "probe-rreg", "halfspace")
    assert code == EXIT_USAGE
    assert "precondition" in err


def test_bilevel_command_on_lower_level_only_problem(capsys):
    code, _, err = run(capsys, "solve-opt", "halfspace")
    assert code == EXIT_USAGE
    assert "no upper level" in err


def test_scan_csv_output(capsys, tmp_path):
    target = tmp_path / "scan.csv"
    code, out, _ = run(capsys, "scan", "jump", "--grid=-1:1:3", "--out", "csv", "--output", str(target))
    assert code == EXIT_OK
    assert out == ""
    lines = target.read_text().splitlines()
    assert lines[0] == "x1,phi,n_solutions,y1"
    assert len(lines) == 4


def test_malformed_grid_is_a_usage_error(capsys):
    code, _, err = run(capsys, "scan", "jump", "--grid", "0:1")
    assert code == EXIT_USAGE
    assert "malformed grid" in err


def test_reproduce_needs_a_selection(capsys):
    code, _, err = run(capsys, "reproduce")
    assert code == EXIT_USAGE
    assert "--all" in err


def test_reproduce_rejects_unknown_example(capsys):
    code, _, err = run(capsys, "reproduce", "nonexistent")
    assert code == EXIT_USAGE
    assert "nonexistent" in err


def test_reproduce_single_example(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "reproduce", "halfspace", "--output", str(target))
    assert code == EXIT_OK
    assert "PASS" in out
    assert "1/1 checks passed" in out
    assert json.loads(target.read_text())["checks"][0]["passed"] is True


def test_parser_rejects_unknown_qualification():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["check-cq", "qp", "--cq", "acq"])
    assert info.value.code == 2
