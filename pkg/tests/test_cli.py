import subprocess
import sys

import pytest

from lowmach import checks
from lowmach.cli import build_parser, main
from lowmach.grid import build_grid

SMALL = ["--dims", "8,8", "--T", "0.02"]


def test_run_writes_outputs(tmp_path, capsys):
    rc = main(["run", *SMALL, "--mach", "1e-2", "--output-dir", str(tmp_path), "--snapshot-stride", "2"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "FAIL" not in out
    assert (tmp_path / "diagnostics_1e-02.csv").exists()
    assert (tmp_path / "fields_1e-02_00004.csv").exists()


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[grid]\ndims = 6, 6\n[time]\nT = 0.01\n[output]\noutput_dir = {tmp_path / 'out'}\n")
    rc = main(["run", "--config", str(cfg), "--mach", "0.1", "--T", "0.02"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "4/4 steps" in out
    assert (tmp_path / "out" / "diagnostics_1e-01.csv").exists()


def test_sweep_exit_codes(tmp_path, capsys):
    assert main(["sweep", *SMALL, "--machs", "1e-1,1e-2,1e-3", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "sweep_report.csv").exists()
    rc = main(["sweep", *SMALL, "--machs", "2,1e-1,1e-2,1e-3", "--output-dir", str(tmp_path / "f")])
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAILED" in out


def test_check_and_infsup(capsys):
    assert main(["check", "--dims", "6,5"]) == 0
    assert main(["infsup", "--sizes", "4", "8"]) == 0
    out = capsys.readouterr().out
    assert "beta(8x8)" in out


def test_bad_input_exit_code(tmp_path, capsys):
    assert main(["run", "--dims", "8,8", "--machs", "0.01,0.1"]) == 2
    assert "error" in capsys.readouterr().err


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "lowmach", "infsup", "--sizes", "4", "6"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "PASS" in r.stdout


def test_checks_individually():
    g = build_grid((6, 7))
    for res in (checks.duality_check(g, n=10), checks.coercivity_check(g, n=10), checks.dual_mass_check(g, n=5),
                checks.b_identity_check(n=100), checks.pi_bounds_check(n=500)):
        assert res.ok, res.line()
        assert res.line().startswith("PASS")
