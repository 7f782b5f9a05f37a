import json
import os
import subprocess
import sys

import pytest

from codazzi_lab.cli import main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


GOOD = "immersion.name = clifford_torus\nimmersion.params.a = 0.6\nimmersion.params.b = 0.8\ngrid.n1 = 32\n" \
       "grid.n2 = 32\nchecks = gauss, decompose\n"


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert "clifford_torus(a=" in out and out.count("\n") == 7


def test_verify_pass_writes_json(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify", _write(tmp_path, GOOD), "--output", str(out)]) == 0
    assert json.loads(out.read_text())["decomposition"]["verdict"] == "decomposes"


def test_verify_failure_exit_code(tmp_path, capsys):
    assert main(["verify", _write(tmp_path, GOOD), "--tol", "gauss=1e-30", "--tol", "decompose=1e-30"]) in (0, 1)
    cfg = _write(tmp_path, "immersion.name = ellipsoid\ngrid.n1 = 32\ngrid.n2 = 32\nchecks = gauss\n")
    assert main(["verify", cfg, "--tol", "gauss=1e-14"]) == 1
    capsys.readouterr()


def test_verify_overrides(tmp_path, capsys):
    assert main(["verify", _write(tmp_path, GOOD), "--grid", "16", "--mode", "fd", "--format", "markdown"]) == 0
    out = capsys.readouterr().out
    assert "grid 16 x 16" in out and "mode: fd" in out


def test_structural_errors_exit_two(tmp_path, capsys):
    assert main(["verify", _write(tmp_path, "immersion.name = nowhere\n")]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["verify", str(tmp_path / "missing.cfg")]) == 2
    stokes = _write(tmp_path, "immersion.name = round_sphere\ngrid.n1 = 16\ngrid.n2 = 16\nchecks = stokes\n")
    assert main(["verify", stokes]) == 2
    assert "not a closed chart" in capsys.readouterr().err
    assert main(["converge", _write(tmp_path, GOOD), "--grids", "16,32"]) == 2
    assert main(["report", str(tmp_path / "nothing.json")]) == 2


def test_usage_errors_exit_two(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", "x.cfg", "--tol", "gauss"])
    assert info.value.code == 2
    capsys.readouterr()


def test_converge(tmp_path, capsys):
    cfg = _write(tmp_path, "immersion.name = ellipsoid\nmode = fd\nfd.stencil = 2\nchecks = codazzi_h\n")
    assert main(["converge", cfg, "--grids", "32,64,128"]) == 0
    out = capsys.readouterr().out
    assert "| codazzi_h |" in out


def test_report_roundtrip(tmp_path, capsys):
    out = tmp_path / "r.json"
    main(["verify", _write(tmp_path, GOOD), "--output", str(out)])
    assert main(["report", str(out)]) == 0
    assert "Decomposition verdict:** decomposes" in capsys.readouterr().out


def test_console_script_entry_point(tmp_path):
    cfg = _write(tmp_path, GOOD)
    proc = subprocess.run([sys.executable, "-m", "codazzi_lab.cli", "verify", cfg, "--format", "markdown"],
                          capture_output=True, text=True, cwd=ROOT)
    assert proc.returncode == 0, proc.stderr
    assert "| gauss |" in proc.stdout
