"""Matrix-free MAC operators on cell and face arrays.

All divergence-type operators are per unit measure: primal ones are divided by
``|K|``, dual ones by ``|D_sigma|``.  Face-valued outputs are full face arrays
whose external entries are zero.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .barotropic import pressure
from .grid import MacGrid


def _pad(a: np.ndarray, axis: int) -> np.ndarray:
    width = [(0, 0)] * a.ndim
    width[axis] = (1, 1)
    return np.pad(a, width)


def _shift(a: np.ndarray, axis: int, lo: int, hi: int | None) -> np.ndarray:
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(lo, hi)
    return a[tuple(sl)]


def _zero_external(grid: MacGrid, faces: list[np.ndarray]) -> list[np.ndarray]:
    for i in range(grid.d):
        mask = ~grid.face_mask(i)
        faces[i][mask] = 0.0
    return faces


# -- primal operators -------------------------------------------------------

def upwind_density(grid: MacGrid, rho: np.ndarray, u: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Face density ``rho_sigma``: ``rho_K`` if ``u_{K,sigma} >= 0`` else ``rho_L``.

    External entries are zero (the flux there is zero anyway).
    """
    out = grid.face_zeros()
    for i in range(grid.d):
        sl = grid.internal_slice(i)
        rho_k = np.take(rho, np.arange(0, grid.dims[i] - 1), axis=i)
        rho_l = np.take(rho, np.arange(1, grid.dims[i]), axis=i)
        out[i][sl] = np.where(u[i][sl] >= 0.0, rho_k, rho_l)
    return out


def mass_flux(grid: MacGrid, rho: np.ndarray, u: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Upwind mass flux ``|sigma| rho_sigma u`` oriented along ``+e_i``; zero on external faces."""
    rho_face = upwind_density(grid, rho, u)
    return [grid.face_area(i) * rho_face[i] * np.where(grid.face_mask(i), u[i], 0.0) for i in range(grid.d)]


def flux_divergence(grid: MacGrid, flux: Sequence[np.ndarray]) -> np.ndarray:
    """``(1/|K|) sum_sigma F_{K,sigma}`` for fluxes oriented along ``+e_i``."""
    out = grid.cell_zeros()
    for i in range(grid.d):
        out += np.diff(flux[i], axis=i)
    return out / grid.cell_volume


def mass_divergence(grid: MacGrid, rho: np.ndarray, u: Sequence[np.ndarray]) -> np.ndarray:
    return flux_divergence(grid, mass_flux(grid, rho, u))


def velocity_divergence(grid: MacGrid, u: Sequence[np.ndarray]) -> np.ndarray:
    out = grid.cell_zeros()
    for i in range(grid.d):
        out += np.diff(np.where(grid.face_mask(i), u[i], 0.0), axis=i) / grid.h[i]
    return out


def gradient(grid: MacGrid, c: np.ndarray) -> list[np.ndarray]:
    """Face gradient ``(|sigma|/|D_sigma|)(c_L - c_K)`` of a cell field."""
    out = grid.face_zeros()
    for i in range(grid.d):
        out[i][grid.internal_slice(i)] = np.diff(c, axis=i) * (grid.face_area(i) / grid.dual_volume(i))
    return out


def pressure_gradient(grid: MacGrid, rho: np.ndarray, gamma: float) -> list[np.ndarray]:
    return gradient(grid, pressure(rho, gamma))


# -- dual operators ---------------------------------------------------------

def dual_density(grid: MacGrid, rho: np.ndarray) -> list[np.ndarray]:
    """``rho_{D_sigma} = (|D_K| rho_K + |D_L| rho_L) / |D_sigma|`` on internal faces (zero elsewhere)."""
    out = grid.face_zeros()
    for i in range(grid.d):
        w = grid.half_dual_volume(i) / grid.dual_volume(i)
        rho_k = np.take(rho, np.arange(0, grid.dims[i] - 1), axis=i)
        rho_l = np.take(rho, np.arange(1, grid.dims[i]), axis=i)
        out[i][grid.internal_slice(i)] = w * rho_k + w * rho_l
    return out


def dual_mass_fluxes(grid: MacGrid, flux: Sequence[np.ndarray]) -> list[list[np.ndarray]]:
    """Dual-face mass fluxes ``P[i][k]``.

    ``P[i][k]`` has the face shape of axis ``i`` plus one along ``k``; entry
    ``m`` along ``k`` is the flux, oriented along ``+e_k``, through the dual face
    between the axis-``i`` faces ``m - 1`` and ``m``.  The first and last
    entries along ``k`` lie on the boundary of the dual mesh and are zero.
    """
    out = []
    for i in range(grid.d):
        row = []
        for k in range(grid.d):
            if k == i:
                # dual face at a primal cell centre: mean of that cell's two axis-i fluxes
                fp = _pad(flux[i], i)
                row.append(0.5 * (_shift(fp, i, None, -1) + _shift(fp, i, 1, None)))
            else:
                # halves of the axis-k faces of the two cells sharing sigma
                fp = _pad(flux[k], i)
                row.append(0.5 * (_shift(fp, i, None, -1) + _shift(fp, i, 1, None)))
        out.append(row)
    return out


def dual_flux_divergence(grid: MacGrid, dual_flux: Sequence[Sequence[np.ndarray]]) -> list[np.ndarray]:
    """``(1/|D_sigma|) sum_eps F_{sigma,eps}`` on internal faces."""
    out = grid.face_zeros()
    for i in range(grid.d):
        acc = np.zeros(grid.face_shape(i))
        for k in range(grid.d):
            acc += np.diff(dual_flux[i][k], axis=k)
        out[i] = np.where(grid.face_mask(i), acc / grid.dual_volume(i), 0.0)
    return out


def velocity_convection(grid: MacGrid, dual_flux: Sequence[Sequence[np.ndarray]],
                        v: Sequence[np.ndarray]) -> list[np.ndarray]:
    """``(1/|D_sigma|) sum_eps F_{sigma,eps} (v_sigma + v_sigma') / 2`` with centred dual-face values."""
    out = grid.face_zeros()
    for i in range(grid.d):
        vi = np.where(grid.face_mask(i), v[i], 0.0)
        acc = np.zeros(grid.face_shape(i))
        for k in range(grid.d):
            vp = _pad(vi, k)
            v_eps = 0.5 * (_shift(vp, k, None, -1) + _shift(vp, k, 1, None))
            acc += np.diff(dual_flux[i][k] * v_eps, axis=k)
        out[i] = np.where(grid.face_mask(i), acc / grid.dual_volume(i), 0.0)
    return out


def _dual_weights(grid: MacGrid, i: int, k: int) -> np.ndarray:
    """``|eps| / (d_eps |D_sigma|)`` for the dual faces of axis-``i`` unknowns along ``k``.

    Along ``k == i`` the neighbours across every dual face are faces (external
    ones carry the Dirichlet value) at distance ``h_i``.  Along ``k != i`` the
    outermost dual faces lie on the boundary, half a cell from the unknown.
    """
    h = grid.h[k]
    if k == i:
        return np.full(grid.dims[i], 1.0 / h**2)
    w = np.full(grid.dims[k] + 1, 1.0 / h**2)
    w[0] = w[-1] = 2.0 / h**2
    return w


def _expand(w: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = w.size
    return w.reshape(shape)


def laplacian(grid: MacGrid, u: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Componentwise finite-volume Laplacian on the dual mesh with homogeneous Dirichlet ghosts."""
    out = grid.face_zeros()
    for i in range(grid.d):
        ui = np.where(grid.face_mask(i), u[i], 0.0)
        acc = np.zeros(grid.face_shape(i))
        for k in range(grid.d):
            w = _expand(_dual_weights(grid, i, k), k, grid.d)
            if k == i:
                g = w * np.diff(ui, axis=k)
                acc[grid.internal_slice(i)] += np.diff(g, axis=k)
            else:
                g = w * np.diff(_pad(ui, k), axis=k)
                acc += np.diff(g, axis=k)
        out[i] = np.where(grid.face_mask(i), acc, 0.0)
    return out


def diffusion(grid: MacGrid, u: Sequence[np.ndarray], mu: float, lam: float = 0.0) -> list[np.ndarray]:
    """MAC discretization of ``div tau(u) = mu Lap u + (mu + lam) grad div u``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if not mu + lam > 0:
        raise ValueError(f"mu + lambda must be positive, got {mu + lam}")
    lap = laplacian(grid, u)
    gd = gradient(grid, velocity_divergence(grid, u))
    return [mu * lap[i] + (mu + lam) * gd[i] for i in range(grid.d)]


def dual_difference_terms(grid: MacGrid, u: Sequence[np.ndarray]):
    """Yield ``(weight_times_volume, difference)`` over every dual face of every component.

    ``sum weight * difference**2`` is the squared broken H1 norm.
    """
    for i in range(grid.d):
        ui = np.where(grid.face_mask(i), u[i], 0.0)
        for k in range(grid.d):
            w = _expand(_dual_weights(grid, i, k), k, grid.d) * grid.dual_volume(i)
            if k == i:
                diff = np.diff(ui, axis=k)
            else:
                diff = np.diff(_pad(ui, k), axis=k)
            yield np.broadcast_to(w, diff.shape), diff
