import json
import subprocess
import sys

import pytest

from threshnet import build_grid, save_graph
from threshnet.cli import build_parser, config_from_args, main


def test_simulate_passes(tmp_path, capsys):
    assert main(["simulate", "--rows", "5", "--cols", "5", "--seed", "1", "--output-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.strip().endswith("PASS")
    assert (tmp_path / "summary.json").exists()


def test_simulate_json(capsys):
    assert main(["simulate", "--rows", "4", "--cols", "4", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] and doc["m"] == 28


def test_simulate_failure_exit_code(capsys):
    # A concentration tolerance no finite network can meet.
    assert main(["simulate", "--rows", "4", "--cols", "4", "--concentration-tol", "1e-9"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rows": 7, "cols": 3, "delta": 0.2, "object_cells": [[6, 0]]}))
    args = build_parser().parse_args(["simulate", "--config", str(cfg), "--delta", "0.5", "--source", "0,1"])
    c = config_from_args(args)
    assert (c.rows, c.cols, c.delta, c.source, c.object_cells) == (7, 3, 0.5, (0, 1), [(6, 0)])


def test_sweep(tmp_path, capsys):
    code = main(["sweep", "--rows", "3", "--cols", "3", "--axis", "r", "--values", "50", "800", "--seeds", "0",
                 "--output-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "mean peak activity at r=800" in out
    assert (tmp_path / "sweep.csv").exists()


def test_path_with_lp_check(capsys):
    assert main(["path", "--rows", "4", "--cols", "4", "--lp-check"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("nodes=0,") and "PASS" in out


def test_path_from_graph_file(tmp_path, capsys):
    save_graph(build_grid(2, 2), tmp_path / "g.json")
    assert main(["path", "--graph", str(tmp_path / "g.json"), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["nodes"][-1] == "ground"


def test_steady(tmp_path, capsys):
    assert main(["steady", "--rows", "5", "--cols", "5", "--output", str(tmp_path / "s.json")]) == 0
    assert "PASS" in capsys.readouterr().out
    assert json.loads((tmp_path / "s.json").read_text())["kkt"]["passed"]


def test_validate_subset(capsys):
    assert main(["validate", "--quick", "--criteria", "5", "6"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [l.split()[0] for l in lines] == ["[PASS]", "[PASS]"]


def test_bad_input_exit_code(capsys):
    assert main(["steady", "--rows", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_verb():
    with pytest.raises(SystemExit):
        main(["explode"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "threshnet", "path", "--rows", "2", "--cols", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nodes=0")
