import numpy as np
import pytest
import scipy.linalg as sla

from lowmach import operators as ops
from lowmach.compressible import SchemeParams, advance, init_state
from lowmach.diagnostics import (
    BarotropicFunctions,
    DiagnosticsRecord,
    global_entropy_terms,
    infsup_estimate,
    kinetic_energy_residual,
    pi_gamma_bounds_check,
    pi_two_regime_constant,
    pi_upper_constant,
    pressure_fluctuation,
    read_records_csv,
    renormalization_remainder,
    write_records_csv,
)
from lowmach.grid import build_grid
from lowmach.harness import well_prepared_data

from conftest import dense_from_action


def _run(dims=(8, 8), mach=0.1, gamma=2.0, steps=3):
    g = build_grid(dims)
    prm = SchemeParams(gamma=gamma, mach=mach)
    data = well_prepared_data(mach, g)
    st = init_state(g, prm, data.u0, drho0=data.drho0)
    for _ in range(steps):
        st = advance(st)
    return st


def test_barotropic_functions():
    f = BarotropicFunctions(2.0)
    assert f.pi(3.0) == pytest.approx(4.0)
    assert f.pressure(3.0) == pytest.approx(9.0)
    assert f.b(3.0) == pytest.approx(9.0)
    assert BarotropicFunctions(1.0).pi(np.e) == pytest.approx(1.0)


def test_renormalization_two_cell_hand_case():
    """gamma = 2, flow from left to right across the single x face of a 2x2 grid."""
    g = build_grid((2, 2))
    drho = np.array([[0.2, 0.2], [-0.1, -0.1]])
    drho_new = np.array([[0.1, 0.1], [0.0, 0.0]])
    u = g.face_zeros()
    u[0][1, :] = 0.4
    R, scale = renormalization_remainder(g, drho, drho_new, u, 2.0, 0.1)
    # left:  -(dPi/dt + div((b - 2 rho) u) + p div u) = -(-0.3 - 0.792 + 0.968)
    # right: -(-0.1 + 0.792 - 0.8)
    assert np.allclose(R[0], 0.124, rtol=1e-12)
    assert np.allclose(R[1], 0.108, rtol=1e-12)
    assert np.allclose(scale[0], 0.3 + 0.792 + 0.968)
    assert np.allclose(scale[1], 0.1 + 0.792 + 0.8)


def test_constant_state_diagnostics_vanish():
    g = build_grid((4, 4))
    z = g.cell_zeros()
    u = g.face_zeros()
    R, _ = renormalization_remainder(g, z, z, u, 1.4, 0.1)
    assert np.all(R == 0)
    res, _, rem = kinetic_energy_residual(g, 0.1, 0.1, 0.1, 0.0, z, z, u, u, u, u, u)
    assert all(np.all(r == 0) for r in res)
    assert all(np.all(r == 0) for r in rem)


def test_one_step_identities_8x8():
    st = _run(steps=1)
    r = st.records[0]
    assert r.kinetic_residual <= 1e-10
    assert r.kinetic_remainder_min >= 0.0
    assert r.renorm_min_rel >= -1e-12
    assert r.dual_mass_residual <= 1e-10
    assert r.local_entropy <= 1e-10 * r.local_entropy_scale


@pytest.mark.parametrize("mach", [0.1, 1e-3])
def test_global_entropy_terms_each_bounded(mach):
    st = _run(mach=mach, steps=4)
    terms = global_entropy_terms(st)
    assert all(t >= 0 for t in terms)
    assert all(t <= st.C0 * (1 + 1e-9) for t in terms)
    for r in st.records:
        assert r.pi_sum <= st.C0 * mach**2 * (1 + 1e-9)
        assert r.global_entropy <= r.C0 + 1e-9 * max(1.0, r.C0)


def test_records_finite_and_csv_round_trip(tmp_path):
    st = _run(steps=2)
    for r in st.records:
        assert all(np.isfinite(float(getattr(r, c))) for c in DiagnosticsRecord.columns())
    path = tmp_path / "diag.csv"
    write_records_csv(path, st.records)
    first = open(path).readline()
    assert first.startswith("# columns:")
    assert first.split(":", 1)[1].split() == DiagnosticsRecord.columns()
    rows = read_records_csv(path)
    assert [float(x["global_entropy"]) for x in rows] == [r.global_entropy for r in st.records]


def test_pressure_fluctuation():
    g = build_grid((3, 4))
    assert np.all(pressure_fluctuation(g, np.full(g.shape, 2.5), 0.1) == 0)
    p = 1 + np.random.default_rng(0).uniform(0, 1, g.shape)
    dp = pressure_fluctuation(g, p, 1e-2)
    assert abs(dp.mean()) <= 1e-13 * np.abs(dp).max()
    with pytest.raises(ValueError):
        pressure_fluctuation(g, p, 0.0)


@pytest.mark.parametrize("gamma", [1.0, 1.4, 2.0, 3.0])
def test_pi_bounds(gamma):
    rep = pi_gamma_bounds_check(gamma)
    assert rep.ok
    assert rep.lower_applies == (gamma >= 2)
    assert rep.two_regime_applies == (gamma < 2)


def test_pi_constants():
    # Pi'' = gamma rho^(gamma - 2) is decreasing for gamma < 2, so the ratio peaks at rho -> 0 where it is 1
    assert pi_upper_constant(1.4) == pytest.approx(1.0)
    # for gamma = 3, Pi = (rho - 1)^2 (rho + 2) / 2, ratio at rho = 2 is 2
    assert pi_upper_constant(3.0) == pytest.approx(2.0)
    coarse = pi_upper_constant(1.4, n_grid=2_001)
    assert abs(coarse - pi_upper_constant(1.4)) <= 0.01 * coarse
    c2 = pi_two_regime_constant(1.4)
    assert 0 < c2 <= 1.0
    assert abs(pi_two_regime_constant(1.4, n_grid=20_001) - c2) <= 0.01 * c2


def _infsup_oracle(grid):
    A = -dense_from_action(grid, lambda v: ops.laplacian(grid, v))
    A = A * grid.dual_volume(0)
    n = grid.n_cells
    B = np.zeros((n, grid.n_unknowns))
    for j in range(grid.n_unknowns):
        e = np.zeros(grid.n_unknowns)
        e[j] = 1.0
        B[:, j] = grid.cell_volume * ops.velocity_divergence(grid, grid.unpack(e)).ravel()
    Z = sla.null_space(np.ones((1, n)))
    S = Z.T @ B @ np.linalg.solve(A, B.T) @ Z
    lam = sla.eigh(S, grid.cell_volume * np.eye(n - 1), eigvals_only=True)
    return float(np.sqrt(lam.min()))


def test_infsup_matches_eigen_oracle():
    g = build_grid((4, 4))
    beta = infsup_estimate(g)
    assert beta > 0
    assert beta == pytest.approx(_infsup_oracle(g), rel=1e-8)


def test_infsup_translation_invariant_and_size_guard():
    a = infsup_estimate(build_grid((6, 6)))
    b = infsup_estimate(build_grid((6, 6), origin=(3.0, -2.0)))
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(ValueError):
        infsup_estimate(build_grid((40, 40)))


def test_infsup_stable_8_to_16():
    b8 = infsup_estimate(build_grid((8, 8)))
    b16 = infsup_estimate(build_grid((16, 16)))
    assert abs(b16 - b8) <= 0.2 * b8
