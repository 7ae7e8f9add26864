import json
import shutil
import subprocess
import sys

import pytest

from polybiharm.mesh import load_mesh
from polybiharm.study.cli import main


def test_mesh_command(tmp_path, capsys):
    out = tmp_path / "hex.json"
    assert main(["mesh", "--kind", "hexagonal", "--n", "4", "--out", str(out)]) == 0
    mesh = load_mesh(out)
    assert mesh.cell_area.sum() == pytest.approx(1.0)
    assert "cells" in capsys.readouterr().out


def test_mesh_command_rejects_bad_n(tmp_path, capsys):
    assert main(["mesh", "--kind", "cartesian", "--n", "0", "--out", str(tmp_path / "m.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_run_command(tmp_path, capsys):
    cfg = tmp_path / "study.cfg"
    cfg.write_text(f"methods = wg, nip\ndegrees = 2\nmesh = cartesian\nlevels = 4, 8\noutput = {tmp_path / 'rep'}\n")
    code = main(["run", "--config", str(cfg)])
    out = capsys.readouterr().out
    doc = json.loads((tmp_path / "rep.json").read_text())
    assert code == (0 if doc["passed"] else 1)
    assert (tmp_path / "rep.csv").exists()
    assert out.count("k=2") >= 4


def test_run_command_output_override(tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("methods = hho\nlevels = 2\n")
    main(["run", "--config", str(cfg), "--output", str(tmp_path / "other")])
    assert (tmp_path / "other.json").exists()


def test_bad_config_exits_with_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("methods = wg\nlevels = four\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.cfg")]) == 2


def test_check_single_criterion(capsys):
    assert main(["check", "--criteria", "9"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 9" in out and "1/1 criteria passed" in out


@pytest.mark.skipif(shutil.which("study") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = tmp_path / "m.json"
    proc = subprocess.run(
        ["study", "mesh", "--kind", "perturbed-quad", "--n", "3", "--out", str(out)], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    assert load_mesh(out).n_cells == 9


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "polybiharm.study.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "check" in proc.stdout
