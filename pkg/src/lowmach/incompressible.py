"""Incompressible MAC pressure-correction (projection) scheme, the zero Mach limit of :mod:`compressible`."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .compressible import stencils
from .fields import norm_l2_faces
from .grid import MacGrid
from .linalg import DEFAULT_TOL, solve


@dataclass(frozen=True)
class IncParams:
    mu: float = 0.1
    lam: float = 0.0
    dt: float = 5e-3
    linear_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.mu > 0 or not self.mu + self.lam > 0:
            raise ValueError("need mu > 0 and mu + lambda > 0")
        if not self.dt > 0:
            raise ValueError("time step must be positive")


@dataclass
class IncState:
    grid: MacGrid
    params: IncParams
    n: int
    u: list[np.ndarray]
    dp: np.ndarray
    history: list[dict] = field(default_factory=list)


def _zero_mean(c: np.ndarray) -> np.ndarray:
    c = c - c.mean()
    return c - c.mean()


def inc_init_state(grid: MacGrid, params: IncParams, u0: Sequence[np.ndarray],
                   dp0: np.ndarray | None = None) -> IncState:
    u0 = [np.array(u0[i], dtype=float) for i in range(grid.d)]
    for i in range(grid.d):
        u0[i][~grid.face_mask(i)] = 0.0
    dp0 = grid.cell_zeros() if dp0 is None else _zero_mean(np.asarray(dp0, dtype=float))
    return IncState(grid, params, 0, u0, dp0)


def inc_prediction_matrix(state: IncState) -> sp.csr_matrix:
    grid, prm = state.grid, state.params
    st = stencils(grid)
    flux = ops.mass_flux(grid, np.ones(grid.shape), state.u)
    C = st.convection(ops.dual_mass_fluxes(grid, flux))
    return (sp.identity(grid.n_unknowns) / prm.dt + C - st.diffusion(prm.mu, prm.lam)).tocsr()


def inc_prediction_step(state: IncState) -> list[np.ndarray]:
    grid, prm = state.grid, state.params
    A = inc_prediction_matrix(state)
    rhs = grid.pack(state.u) / prm.dt - grid.pack(ops.gradient(grid, state.dp))
    return grid.unpack(solve(A, rhs, tol=prm.linear_tol))


def poisson_matrix(grid: MacGrid) -> sp.csr_matrix:
    """``div o grad`` on cell fields (singular: constants span its kernel)."""
    st = stencils(grid)
    return (st.divergence @ st.gradient).tocsr()


def inc_correction_step(state: IncState, u_tilde: Sequence[np.ndarray]):
    """Project ``u~`` onto discretely solenoidal fields; returns ``(u^{n+1}, dp^{n+1})``.

    ``phi = dp^{n+1} - dp^n`` solves ``dt div grad phi = div u~`` with a zero-mean
    constraint imposed by a Lagrange multiplier.
    """
    grid, prm = state.grid, state.params
    st = stencils(grid)
    L = poisson_matrix(grid)
    N = grid.n_cells
    ones = sp.csr_matrix(np.full((N, 1), grid.cell_volume))
    K = sp.bmat([[prm.dt * L, ones], [ones.T, None]]).tocsr()
    rhs = np.concatenate([st.divergence @ grid.pack(u_tilde), [0.0]])
    sol = solve(K, rhs, tol=prm.linear_tol)
    phi = sol[:N].reshape(grid.shape)
    u_new = grid.pack(u_tilde) - prm.dt * (st.gradient @ phi.ravel())
    return grid.unpack(u_new), _zero_mean(state.dp + phi)


def inc_advance(state: IncState) -> IncState:
    u_tilde = inc_prediction_step(state)
    u_new, dp_new = inc_correction_step(state, u_tilde)
    grid = state.grid
    div = ops.velocity_divergence(grid, u_new)
    rec = {
        "step": state.n + 1,
        "divergence_max": float(np.abs(div).max()),
        "kinetic_energy": 0.5 * norm_l2_faces(grid, u_new) ** 2,
        "dp_mean": float(dp_new.mean()),
    }
    return replace(state, n=state.n + 1, u=u_new, dp=dp_new, history=state.history + [rec])


def inc_run(state: IncState, n_steps: int) -> list[IncState]:
    """Advance ``n_steps`` times; returns every level including the initial one."""
    out = [state]
    for _ in range(n_steps):
        state = inc_advance(state)
        out.append(state)
    return out
