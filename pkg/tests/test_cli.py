import csv
import json

import pytest

from stratified.cli import main


def _write(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text)
    return str(path)


def test_group_info(tmp_path, capsys):
    assert main(["group-info", "--config", _write(tmp_path, "group: Engel\n")]) == 0
    assert "strata [2, 1, 1], N=4, Q=7, rank 4" in capsys.readouterr().out


def test_verify_divergence_writes_reports(tmp_path):
    assert main(["verify", "divergence", "--out", str(tmp_path), "--quiet"]) == 0
    rows = list(csv.DictReader((tmp_path / "verify_divergence.csv").open()))
    assert list(rows[0]) == ["identity", "group", "domain", "p", "lhs", "rhs", "residual", "tolerance", "pass"]
    doc = json.loads((tmp_path / "verify_divergence.json").read_text())
    assert doc["passed"] is True


def test_verify_uses_config_case(tmp_path):
    cfg = _write(tmp_path, "group: H1\ndomain: {kind: box, lo: [0, 0, 0], hi: [1, 1, 1]}\n"
                           "u: x1^2*x3\nv: x2 + 1\np: 2\n")
    assert main(["verify", "green1", "--config", cfg, "--quiet"]) == 0


def test_malformed_expression_is_a_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, "group: H1\ndomain: {kind: box, lo: [0, 0, 0], hi: [1, 1, 1]}\nu: 'x1 +'\nv: x2\n")
    assert main(["verify", "green1", "--config", cfg]) == 2
    assert "u:" in capsys.readouterr().err


def test_unknown_coordinate_is_a_config_error(tmp_path):
    cfg = _write(tmp_path, "group: H1\ndomain: {kind: box, lo: [0, 0, 0], hi: [1, 1, 1]}\nu: x7\nv: x2\n")
    assert main(["verify", "green1", "--config", cfg]) == 2


def test_failed_check_exits_one(tmp_path, capsys):
    cfg = _write(tmp_path, "group: H1\ndomain: {kind: box, lo: [0, 0, 0], hi: [1, 1, 1]}\nu: x1\nkind: dirichlet\n")
    assert main(["verify", "bc", "--config", cfg]) == 1
    assert "failed" in capsys.readouterr().err


def test_solve_writes_solution(tmp_path):
    cfg = _write(tmp_path, "group: R2\ndomain: {kind: box, lo: [0, 0], hi: [1, 1]}\nreaction: '1'\n"
                           "solver: {n: 9, p: 2}\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    rows = list(csv.reader((tmp_path / "solution.csv").open()))
    assert rows[0] == ["x1", "x2", "u"] and len(rows) == 82


def test_experiment_trivial(tmp_path):
    assert main(["experiment", "trivial", "--quiet"]) == 0


def test_suite_is_deterministic(tmp_path):
    cfg = _write(tmp_path, "criteria: [1, 3, 7]\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["suite", "--config", cfg, "--out", str(a), "--quiet"]) == 0
    assert main(["suite", "--config", cfg, "--out", str(b), "--quiet"]) == 0
    for name in ("suite.csv", "suite.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_bad_subcommand_exits_by_argparse():
    with pytest.raises(SystemExit):
        main(["nonsense"])
