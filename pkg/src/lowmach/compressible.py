"""Pressure-correction MAC scheme for the barotropic compressible Navier-Stokes equations.

One time step is

1. scale the pressure gradient by ``(rho^n_D / rho^{n-1}_D)^{1/2}``;
2. predict ``u~`` from the momentum balance with the scaled gradient;
3. correct: solve the coupled mass balance / velocity correction for
   ``rho^{n+1}``, ``u^{n+1}`` and set ``p^{n+1} = (rho^{n+1})^gamma``.

Densities are stored as deviations from the reference value 1 (``drho``), so
that ``(grad p) / Ma**2`` keeps full precision when ``Ma`` is small.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import operators as ops
from .assembly import Stencils
from .barotropic import DensityError, dpressure_dev, pressure_excess
from .grid import MacGrid
from .linalg import DEFAULT_TOL, solve

logger = logging.getLogger(__name__)


class SchemeError(RuntimeError):
    pass


class NewtonError(SchemeError):
    def __init__(self, message: str, history: Sequence[float]):
        super().__init__(f"{message}; residual history: " + ", ".join(f"{r:.3e}" for r in history))
        self.history = list(history)


@dataclass(frozen=True)
class SchemeParams:
    gamma: float = 2.0
    mu: float = 0.1
    lam: float = 0.0
    mach: float = 1e-2
    dt: float = 5e-3
    newton_tol: float = 1e-11
    max_newton: int = 50
    max_halvings: int = 30
    linear_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.mu + self.lam > 0:
            raise ValueError("mu + lambda must be positive")
        if not self.mach > 0:
            raise ValueError(f"Mach number must be positive, got {self.mach}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")


@dataclass
class SchemeState:
    """Time levels ``n - 1`` and ``n`` needed to advance the scheme."""

    grid: MacGrid
    params: SchemeParams
    n: int
    drho_prev: np.ndarray
    drho: np.ndarray
    u: list[np.ndarray]
    grad_p: list[np.ndarray]
    # running sum of mu * dt * ||u~^k||_{1,M}^2, used by the global entropy estimate
    dissipation: float = 0.0
    C0: float | None = None
    records: list = field(default_factory=list)

    @property
    def rho(self) -> np.ndarray:
        return 1.0 + self.drho

    @property
    def rho_prev(self) -> np.ndarray:
        return 1.0 + self.drho_prev

    @property
    def p(self) -> np.ndarray:
        return 1.0 + pressure_excess(self.drho, self.params.gamma)


@dataclass
class PredictionResult:
    u_tilde: list[np.ndarray]
    grad_p_bar: list[np.ndarray]
    residual: float


@dataclass
class CorrectionResult:
    drho: np.ndarray
    u: list[np.ndarray]
    grad_p: list[np.ndarray]
    iterations: int
    history: list[float]

    @property
    def rho(self) -> np.ndarray:
        return 1.0 + self.drho


_STENCILS: dict[MacGrid, Stencils] = {}


def stencils(grid: MacGrid) -> Stencils:
    st = _STENCILS.get(grid)
    if st is None:
        st = _STENCILS[grid] = Stencils(grid)
    return st


def pressure_gradient_dev(grid: MacGrid, drho: np.ndarray, gamma: float) -> list[np.ndarray]:
    """Discrete pressure gradient of ``rho = 1 + drho``, computed from the pressure excess."""
    return ops.gradient(grid, pressure_excess(drho, gamma))


def init_state(grid: MacGrid, params: SchemeParams, u0: Sequence[np.ndarray],
               rho0: np.ndarray | None = None, drho0: np.ndarray | None = None) -> SchemeState:
    """Initial state from cell-averaged density and face-averaged velocity.

    Give either ``rho0`` or its deviation ``drho0 = rho0 - 1``.  ``rho^{-1}`` is
    obtained from the mass balance run backward over one step.
    """
    if (rho0 is None) == (drho0 is None):
        raise ValueError("pass exactly one of rho0 and drho0")
    drho0 = np.asarray(rho0, dtype=float) - 1.0 if drho0 is None else np.array(drho0, dtype=float)
    if drho0.shape != grid.shape:
        raise ValueError(f"density has shape {drho0.shape}, grid has {grid.shape}")
    if np.any(~(1.0 + drho0 > 0)):
        raise DensityError("initial density must be positive")
    u0 = [np.array(u0[i], dtype=float) for i in range(grid.d)]
    for i in range(grid.d):
        if u0[i].shape != grid.face_shape(i):
            raise ValueError(f"velocity component {i} has shape {u0[i].shape}")
        if np.any(u0[i][~grid.face_mask(i)] != 0.0):
            raise ValueError("initial velocity must vanish on external faces")

    drho_prev = drho0 + params.dt * ops.mass_divergence(grid, 1.0 + drho0, u0)
    if np.any(~(1.0 + drho_prev > 0)):
        raise DensityError("backward mass balance gave a nonpositive rho^{-1}; "
                           "reduce the time step or the compressible part of the data")
    state = SchemeState(grid, params, 0, drho_prev, drho0, u0,
                        pressure_gradient_dev(grid, drho0, params.gamma))
    from .diagnostics import initial_constant_C0
    state.C0 = initial_constant_C0(state)
    return state


def scale_pressure_gradient(state: SchemeState) -> list[np.ndarray]:
    grid = state.grid
    rd = ops.dual_density(grid, state.rho)
    rd_prev = ops.dual_density(grid, state.rho_prev)
    out = grid.face_zeros()
    for i in range(grid.d):
        m = grid.face_mask(i)
        if np.any(~(rd[i][m] > 0)) or np.any(~(rd_prev[i][m] > 0)):
            raise DensityError("nonpositive dual density")
        out[i][m] = np.sqrt(rd[i][m] / rd_prev[i][m]) * state.grad_p[i][m]
    return out


def prediction_matrix(state: SchemeState) -> sp.csr_matrix:
    grid, prm = state.grid, state.params
    st = stencils(grid)
    rho_d = grid.pack(ops.dual_density(grid, state.rho))
    flux = ops.mass_flux(grid, state.rho, state.u)
    C = st.convection(ops.dual_mass_fluxes(grid, flux))
    return (sp.diags(rho_d / prm.dt) + C - st.diffusion(prm.mu, prm.lam)).tocsr()


def prediction_step(state: SchemeState, grad_p_bar: list[np.ndarray] | None = None) -> PredictionResult:
    """Solve the momentum balance for ``u~^{n+1}`` (one coupled system over all components)."""
    grid, prm = state.grid, state.params
    if grad_p_bar is None:
        grad_p_bar = scale_pressure_gradient(state)
    A = prediction_matrix(state)
    rho_d_prev = grid.pack(ops.dual_density(grid, state.rho_prev))
    rhs = rho_d_prev * grid.pack(state.u) / prm.dt - grid.pack(grad_p_bar) / prm.mach**2
    x = solve(A, rhs, tol=prm.linear_tol)
    res = float(np.linalg.norm(A @ x - rhs) / max(1.0, np.linalg.norm(rhs)))
    return PredictionResult(grid.unpack(x), grad_p_bar, res)


def correction_step(state: SchemeState, pred: PredictionResult) -> CorrectionResult:
    """Solve the correction step for ``rho^{n+1}`` by Newton's method.

    ``u^{n+1}`` is eliminated through the velocity correction, leaving the
    mass balance as a nonlinear system in the density.  The upwind direction
    is frozen within each Newton iterate.
    """
    grid, prm = state.grid, state.params
    st = stencils(grid)
    D, G = st.divergence, st.gradient
    S_K, S_L = st.upwind_selectors
    gamma, dt = prm.gamma, prm.dt
    s = dt / prm.mach**2

    inv_rho_d = 1.0 / grid.pack(ops.dual_density(grid, state.rho))
    # u(drho) = base - s / rho_D * G p_excess(drho)
    base = grid.pack(pred.u_tilde) + s * inv_rho_d * grid.pack(pred.grad_p_bar)
    drho_n = state.drho.ravel()

    def velocity(x):
        return base - s * inv_rho_d * (G @ pressure_excess(x, gamma))

    def residual(x):
        u = velocity(x)
        up = u >= 0.0
        rho_face = 1.0 + np.where(up, S_K @ x, S_L @ x)
        return (x - drho_n) / dt + D @ (rho_face * u), u, up, rho_face

    x = drho_n.copy()
    history = []
    for it in range(prm.max_newton + 1):
        r, u, up, rho_face = residual(x)
        rmax = float(np.abs(r).max())
        history.append(rmax)
        if rmax <= prm.newton_tol * max(1.0, float((1.0 + x).max())):
            break
        if it == prm.max_newton:
            raise NewtonError(f"correction step did not converge in {prm.max_newton} iterations", history)
        Up = sp.diags(up.astype(float)) @ S_K + sp.diags((~up).astype(float)) @ S_L
        du = -s * sp.diags(inv_rho_d) @ G @ sp.diags(dpressure_dev(x, gamma))
        J = sp.identity(grid.n_cells) / dt + D @ (sp.diags(u) @ Up + sp.diags(rho_face) @ du)
        step = solve(J.tocsr(), -r, tol=prm.linear_tol)
        alpha = 1.0
        for _ in range(prm.max_halvings):
            trial = x + alpha * step
            if np.all(1.0 + trial > 0):
                break
            alpha *= 0.5
        else:
            raise NewtonError("density positivity lost after step halving", history)
        x = trial

    drho_new = x.reshape(grid.shape)
    u_new = grid.unpack(velocity(x))
    return CorrectionResult(drho_new, u_new, pressure_gradient_dev(grid, drho_new, gamma), it, history)


@dataclass
class StepData:
    """Everything one advance produced, kept for the diagnostics."""

    before: SchemeState
    pred: PredictionResult
    corr: CorrectionResult


def advance(state: SchemeState, diagnostics: bool = True) -> SchemeState:
    pred = prediction_step(state)
    corr = correction_step(state, pred)
    new = replace(state, n=state.n + 1, drho_prev=state.drho, drho=corr.drho, u=corr.u,
                  grad_p=corr.grad_p, records=list(state.records))
    if diagnostics:
        from .diagnostics import step_record
        rec = step_record(StepData(state, pred, corr), new)
        new.dissipation = state.dissipation + rec.dissipation
        new.records.append(rec)
    return new
