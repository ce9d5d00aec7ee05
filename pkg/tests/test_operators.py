import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowmach import operators as ops
from lowmach.assembly import Stencils
from lowmach.fields import norm_broken_h1
from lowmach.grid import build_grid

from conftest import dense_from_action, random_faces


def test_upwind_by_hand():
    g = build_grid((3, 2))
    rho = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    u = g.face_zeros()
    u[0][1] = [1.0, -1.0]
    u[0][2] = [0.0, -2.0]
    up = ops.upwind_density(g, rho, u)
    assert up[0][1].tolist() == [1.0, 4.0]
    # ties go to the minus cell
    assert up[0][2].tolist() == [3.0, 6.0]
    F = ops.mass_flux(g, rho, u)
    assert F[0][1].tolist() == [g.face_area(0) * 1.0, -g.face_area(0) * 4.0]


def test_gradient_of_linear_field(grid):
    coeffs = np.arange(1, grid.d + 1, dtype=float)
    c = sum(coeffs[k] * x for k, x in enumerate(grid.cell_centers()))
    g = ops.gradient(grid, c)
    for i in range(grid.d):
        m = grid.face_mask(i)
        assert np.allclose(g[i][m], coeffs[i], rtol=1e-12)
        assert np.all(g[i][~m] == 0)


def test_divergence_of_linear_field():
    g = build_grid((5, 4), lengths=(1.0, 2.0))
    u = g.face_zeros()
    x, _ = g.face_centers(0)
    u[0] = np.where(g.face_mask(0), 3.0 * x, 0.0)
    div = ops.velocity_divergence(g, u)
    # interior cells see the exact slope; wall cells see the zero boundary value
    assert np.allclose(div[1:-1], 3.0, rtol=1e-12)
    assert div[0] == pytest.approx(3.0 * g.nodes(0)[1] / g.h[0])


def test_mass_divergence_integrates_to_zero(grid, rng):
    rho = 1.0 + 0.5 * rng.uniform(-1, 1, grid.shape)
    div = ops.mass_divergence(grid, rho, random_faces(grid, rng))
    assert abs(grid.cell_volume * div.sum()) <= 1e-13 * np.abs(grid.cell_volume * div).sum()


def test_dual_density_is_mean():
    g = build_grid((3, 3))
    rho = np.arange(9.0).reshape(3, 3)
    rd = ops.dual_density(g, rho)
    assert rd[0][1, 2] == pytest.approx(0.5 * (rho[0, 2] + rho[1, 2]))
    assert rd[1][2, 1] == pytest.approx(0.5 * (rho[2, 0] + rho[2, 1]))


@settings(max_examples=25, deadline=None)
@given(nx=st.integers(2, 7), ny=st.integers(2, 7), seed=st.integers(0, 2**31 - 1))
def test_grad_div_duality(nx, ny, seed):
    g = build_grid((nx, ny), lengths=(1.0, 1.5))
    r = np.random.default_rng(seed)
    u = random_faces(g, r)
    c = r.standard_normal(g.shape)
    a = g.cell_volume * np.sum(c * ops.velocity_divergence(g, u))
    gc = ops.gradient(g, c)
    b = sum(g.dual_volume(i) * np.sum(u[i] * gc[i]) for i in range(g.d))
    assert abs(a + b) <= 1e-12 * (abs(a) + abs(b) + 1e-300)


def test_sparse_matches_matrix_free(grid, rng):
    st_ = Stencils(grid)
    u = random_faces(grid, rng)
    c = rng.standard_normal(grid.shape)
    rho = 1.0 + 0.5 * rng.uniform(-1, 1, grid.shape)
    assert np.allclose(st_.divergence @ grid.pack(u), ops.velocity_divergence(grid, u).ravel(), atol=1e-12)
    assert np.allclose(st_.gradient @ c.ravel(), grid.pack(ops.gradient(grid, c)), atol=1e-12)
    assert np.allclose(st_.laplacian @ grid.pack(u), grid.pack(ops.laplacian(grid, u)), atol=1e-10)
    assert np.allclose(st_.diffusion(0.3, 0.2) @ grid.pack(u), grid.pack(ops.diffusion(grid, u, 0.3, 0.2)),
                       atol=1e-10)
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, rho, random_faces(grid, rng)))
    assert np.allclose(st_.convection(P) @ grid.pack(u), grid.pack(ops.velocity_convection(grid, P, u)),
                       atol=1e-11)
    S_K, S_L = st_.upwind_selectors
    up = np.where(grid.pack(u) >= 0, S_K @ rho.ravel(), S_L @ rho.ravel())
    assert np.array_equal(up, grid.pack(ops.upwind_density(grid, rho, u)))


def test_laplacian_symmetric_negative_definite(grid):
    L = Stencils(grid).laplacian.toarray()
    assert np.allclose(L, L.T, atol=0)
    assert np.linalg.eigvalsh(L).max() < 0


def test_laplacian_energy_is_h1_norm(grid, rng):
    u = random_faces(grid, rng)
    lap = ops.laplacian(grid, u)
    e = -sum(grid.dual_volume(i) * np.sum(u[i] * lap[i]) for i in range(grid.d))
    assert e == pytest.approx(norm_broken_h1(grid, u) ** 2, rel=1e-12)


def test_laplacian_of_quadratic_interior():
    g = build_grid((8, 8))
    u = g.face_zeros()
    x, y = g.face_centers(0)
    u[0] = np.where(g.face_mask(0), x**2 + 2 * y**2, 0.0)
    lap = ops.laplacian(g, u)
    # away from the walls the five-point stencil is exact on quadratics
    assert np.allclose(lap[0][2:-2, 1:-1], 6.0, rtol=1e-9)


def test_convection_energy_identity(grid, rng):
    """sum |D| v conv(v) = 1/2 sum |D| v^2 divD(P) for the centred dual-face values."""
    rho = 1.0 + 0.5 * rng.uniform(-1, 1, grid.shape)
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, rho, random_faces(grid, rng)))
    v = random_faces(grid, rng)
    conv = ops.velocity_convection(grid, P, v)
    dd = ops.dual_flux_divergence(grid, P)
    lhs = sum(grid.dual_volume(i) * np.sum(v[i] * conv[i]) for i in range(grid.d))
    rhs = 0.5 * sum(grid.dual_volume(i) * np.sum(v[i] ** 2 * dd[i]) for i in range(grid.d))
    assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-12)


def test_convection_of_constant(grid, rng):
    rho = 1.0 + 0.5 * rng.uniform(-1, 1, grid.shape)
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, rho, random_faces(grid, rng)))
    v = [np.where(grid.face_mask(i), 2.5, 0.0) for i in range(grid.d)]
    conv = ops.velocity_convection(grid, P, v)
    dd = ops.dual_flux_divergence(grid, P)
    # interior dual cells only: next to a wall the neighbour value is the zero boundary value
    for i in range(grid.d):
        sl = tuple(slice(2, -2) if k == i else slice(1, -1) for k in range(grid.d))
        assert np.allclose(conv[i][sl], 2.5 * dd[i][sl], atol=1e-12)


def test_diffusion_rejects_bad_viscosity(grid):
    u = grid.face_zeros()
    with pytest.raises(ValueError):
        ops.diffusion(grid, u, 0.0)
    with pytest.raises(ValueError):
        ops.diffusion(grid, u, 0.1, -0.2)


def test_operators_linear(grid, rng):
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, np.ones(grid.shape), random_faces(grid, rng)))
    A = dense_from_action(grid, lambda v: ops.velocity_convection(grid, P, v))
    v = random_faces(grid, rng)
    assert np.allclose(A @ grid.pack(v), grid.pack(ops.velocity_convection(grid, P, v)), atol=1e-11)
