import csv
import filecmp
import math

import numpy as np
import pytest

from lowmach import operators as ops
from lowmach.grid import build_grid
from lowmach.harness import (
    RunConfig,
    check_records,
    gradient_velocity,
    loglog_slope,
    mach_sweep,
    run_compressible,
    run_incompressible,
    stream_function_velocity,
    sweep_checks,
    well_prepared_data,
)


def small_config(**kw):
    base = dict(dims=(8, 8), T=0.02, machs=(1e-1, 1e-2, 1e-3))
    base.update(kw)
    return RunConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(machs=(1e-2, 1e-1, 1e-3))
    with pytest.raises(ValueError):
        RunConfig(machs=(1e-1, 0.0))
    with pytest.raises(ValueError):
        RunConfig(dt=0.03, T=0.1)
    assert RunConfig().n_steps == 20


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[grid]\ndims = 12, 10\nlengths = 1.0, 2.0\n\n[physics]\ngamma = 1.4\nmu = 0.05\n"
                    "[sweep]\nmachs = 0.1 0.01 0.001\n")
    cfg = RunConfig.from_file(path, mu="0.2", gamma=None)
    assert cfg.dims == (12, 10)
    assert cfg.lengths == (1.0, 2.0)
    assert cfg.gamma == 1.4
    assert cfg.mu == 0.2
    assert cfg.machs == (0.1, 0.01, 0.001)
    path.write_text("[grid]\ncells = 3\n")
    with pytest.raises(ValueError):
        RunConfig.from_file(path)


@pytest.mark.parametrize("dims", [(8, 6), (4, 5, 3)])
def test_stream_function_velocity_is_discretely_solenoidal(dims):
    g = build_grid(dims, lengths=(1.0, 1.3, 0.8)[: len(dims)])
    u = stream_function_velocity(g, 0.5)
    assert np.abs(ops.velocity_divergence(g, u)).max() <= 1e-13
    assert max(np.abs(x).max() for x in u) > 0.1
    for i in range(g.d):
        assert np.all(u[i][~g.face_mask(i)] == 0)


def test_gradient_velocity_vanishes_on_walls():
    g = build_grid((6, 6))
    w = gradient_velocity(g, 1.0)
    for i in range(2):
        assert np.all(w[i][~g.face_mask(i)] == 0)
    x, y = g.face_centers(0)
    expected = -np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    assert np.allclose(w[0][g.face_mask(0)], expected[g.face_mask(0)])


def test_well_prepared_examples():
    g = build_grid((32, 32))
    d = well_prepared_data(0.1, g, rho_amp=0.5)
    assert np.abs(d.rho0 - 1).max() <= 0.005
    assert d.rho0.min() > 0
    assert abs(d.dp_limit.mean()) <= 1e-13
    with pytest.raises(ValueError):
        well_prepared_data(2.0, g, rho_amp=0.5)
    with pytest.raises(ValueError):
        well_prepared_data(0.0, g)


def test_well_prepared_scalings_uniform_in_mach():
    g = build_grid((16, 16))
    div_r, rho_r = [], []
    for ma in (1e-1, 1e-2, 1e-3, 1e-4):
        d = well_prepared_data(ma, g)
        div_r.append(np.abs(ops.velocity_divergence(g, d.u0)).max() / ma)
        rho_r.append(np.abs(d.drho0).max() / ma**2)
    assert max(div_r) <= 1.01 * min(div_r)
    assert max(rho_r) <= 1.01 * min(rho_r)


def test_zero_amplitude_gives_constant_trajectory():
    cfg = small_config(psi_amp=0.0, rho_amp=0.0, w_amp=0.0)
    res = run_compressible(cfg, 1e-2)
    assert res.ok
    assert np.all(res.final.drho == 0)
    assert all(np.all(x == 0) for x in res.final.u)


def test_run_16x16_all_diagnostics_within_tolerance():
    cfg = RunConfig(dims=(16, 16))
    res = run_compressible(cfg, 1e-2)
    assert res.ok and len(res.records) == 20
    assert all(check_records(res.records, 1e-2).values())


def test_run_outputs_are_bitwise_reproducible(tmp_path):
    cfg = small_config(snapshot_stride=2)
    run_compressible(cfg, 1e-2, tmp_path / "a")
    run_compressible(cfg, 1e-2, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "diagnostics_1e-02.csv" in names
    assert "fields_1e-02_00004.csv" in names
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == []


def test_incompressible_reference_run():
    levels = run_incompressible(small_config())
    assert len(levels) == 5
    assert all(h["divergence_max"] <= 1e-11 for h in levels[-1].history)


def test_loglog_slope():
    x = np.array([1e-1, 1e-2, 1e-3])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        loglog_slope(x[:2], x[:2])


def test_sweep_report_and_csv(tmp_path):
    cfg = small_config(output_dir=str(tmp_path))
    rep = mach_sweep(cfg)
    assert [e.mach for e in rep.entries] == [1e-1, 1e-2, 1e-3]
    assert rep.order_rho_l2 >= 0.9
    checks = sweep_checks(rep)
    assert checks["velocity_converges_monotonically"]
    text = (tmp_path / "sweep_report.csv").read_text().splitlines()
    assert text[0].startswith("# order_rho_l2 = ")
    rows = list(csv.DictReader(line for line in text if not line.startswith("#")))
    assert [float(r["mach"]) for r in rows] == [1e-1, 1e-2, 1e-3]
    assert float(text[0].split("=")[1]) == rep.order_rho_l2


def test_sweep_needs_three_machs():
    with pytest.raises(ValueError):
        mach_sweep(small_config(machs=(1e-1, 1e-2)))


def test_sweep_continues_past_a_failed_mach():
    # Ma^2 * B >= 1 would make rho0 nonpositive: that run is rejected and marked
    rep = mach_sweep(small_config(machs=(2.0, 1e-1, 1e-2, 1e-3)))
    assert not rep.entries[0].ok
    assert "initialization" in rep.entries[0].error
    assert all(e.ok for e in rep.entries[1:])
    assert math.isfinite(rep.order_rho_l2)
    assert not sweep_checks(rep)["all_runs_within_tolerance"]


def test_sweep_parallel_matches_serial(tmp_path):
    a = mach_sweep(small_config(output_dir=str(tmp_path / "a")))
    b = mach_sweep(small_config(output_dir=str(tmp_path / "b"), workers=2))
    assert filecmp.cmp(tmp_path / "a" / "sweep_report.csv", tmp_path / "b" / "sweep_report.csv", shallow=False)
    assert a.order_rho_l2 == b.order_rho_l2
