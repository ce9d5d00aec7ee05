"""Term-by-term evaluation of the scheme's discrete balances and stability estimates.

Every identity is reported together with a ``scale``: the sum of the absolute
values of its terms, evaluated where the residual is taken.  Tolerances are
relative to that scale.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from . import barotropic as bt
from . import operators as ops
from .fields import norm_broken_h1, norm_l2_cells, norm_lq_cells
from .grid import MacGrid
from .linalg import smallest_singular_value


@dataclass(frozen=True)
class BarotropicFunctions:
    """``p(rho) = rho**gamma``, the renormalization function ``b`` and ``Pi_gamma``."""

    gamma: float

    def pressure(self, rho):
        return bt.pressure(rho, self.gamma)

    def b(self, rho):
        return bt.b(rho, self.gamma)

    def db(self, rho):
        return bt.db(rho, self.gamma)

    def pi(self, rho):
        return bt.pi_gamma_dev(np.asarray(rho, dtype=float) - 1.0, self.gamma)


# -- Pi_gamma bounds ------------------------------------------------------------

@dataclass
class PiBoundsReport:
    gamma: float
    upper_constant: float
    upper_violations: int
    lower_applies: bool
    lower_violations: int
    two_regime_applies: bool
    two_regime_constant: float
    two_regime_violations: int
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.upper_violations == 0 and self.lower_violations == 0 and self.two_regime_violations == 0


def _pi_over_power(rho: np.ndarray, gamma: float, power: float) -> np.ndarray:
    x = rho - 1.0
    return bt.pi_gamma_dev(x, gamma) / np.abs(x) ** power


def pi_upper_constant(gamma: float, n_grid: int = 200_001) -> float:
    """Estimate ``C_gamma = sup_{(0,2)} Pi(rho) / (rho - 1)**2`` on a grid.

    The ratio is monotone in ``rho`` (``Pi''`` is monotone), so the grid
    includes the endpoint limits: ``Pi(0) = 1`` and the value at 2.
    """
    rho = np.linspace(0.0, 2.0, n_grid)[1:-1]
    rho = rho[rho != 1.0]
    ratio = _pi_over_power(rho, gamma, 2.0)
    at_zero = 1.0  # Pi(0+) / 1
    at_two = float(bt.pi_gamma_dev(np.array([1.0]), gamma)[0])
    return float(max(ratio.max(), at_zero, at_two))


def pi_two_regime_constant(gamma: float, R: float = 3.0, n_grid: int = 200_001) -> float:
    """``C_{gamma,R}`` for ``gamma in [1, 2)``: infimum of the two lower-bound ratios."""
    rho_lo = np.linspace(0.0, R, n_grid)[1:]
    rho_lo = rho_lo[rho_lo != 1.0]
    lo = min(float(_pi_over_power(rho_lo, gamma, 2.0).min()), 1.0)
    rho_hi = R * np.logspace(0.0, 8.0, n_grid)
    hi = float(_pi_over_power(rho_hi, gamma, gamma).min())
    if gamma > 1.0:
        hi = min(hi, 1.0 / (gamma - 1.0))
    return min(lo, hi)


def pi_gamma_bounds_check(gamma: float, n_samples: int = 10_000, R: float = 3.0,
                          seed: int = 0, rtol: float = 1e-12) -> PiBoundsReport:
    """Sample the upper bound on (0, 2) and the lower bound(s) on their regimes.

    Comparisons allow a relative rounding slack ``rtol``.
    """
    rng = np.random.default_rng(seed)
    C = pi_upper_constant(gamma)
    rho = rng.uniform(0.0, 2.0, n_samples)
    rho = rho[rho > 0]
    pi = bt.pi_gamma_dev(rho - 1.0, gamma)
    upper_bad = int(np.sum(pi > C * (rho - 1.0) ** 2 * (1 + rtol)))

    lower_applies = gamma >= 2.0
    lower_bad = 0
    if lower_applies:
        rho = np.exp(rng.uniform(np.log(1e-6), np.log(1e3), n_samples))
        pi = bt.pi_gamma_dev(rho - 1.0, gamma)
        lower_bad = int(np.sum(pi < (rho - 1.0) ** 2 * (1 - rtol)))

    two_applies = 1.0 <= gamma < 2.0
    C2 = float("nan")
    two_bad = 0
    if two_applies:
        C2 = pi_two_regime_constant(gamma, R)
        rho = rng.uniform(0.0, R, n_samples)
        rho = rho[rho > 0]
        pi = bt.pi_gamma_dev(rho - 1.0, gamma)
        two_bad += int(np.sum(pi < C2 * (rho - 1.0) ** 2 * (1 - rtol)))
        rho = R * np.exp(rng.uniform(0.0, np.log(1e6), n_samples))
        pi = bt.pi_gamma_dev(rho - 1.0, gamma)
        two_bad += int(np.sum(pi < C2 * np.abs(rho - 1.0) ** gamma * (1 - rtol)))
    return PiBoundsReport(gamma, C, upper_bad, lower_applies, lower_bad, two_applies, C2, two_bad, n_samples)


# -- per-step identities ----------------------------------------------------------

def _plus_minus(a: np.ndarray, axis: int):
    n = a.shape[axis]
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(0, n - 1)
    hi[axis] = slice(1, n)
    return a[tuple(lo)], a[tuple(hi)]


def _neighbors(v: np.ndarray, axis: int):
    """Values at ``J - e_axis`` and ``J + e_axis`` with zeros beyond the array."""
    n = v.shape[axis]
    vp = np.pad(v, [(1, 1) if k == axis else (0, 0) for k in range(v.ndim)])
    return np.take(vp, np.arange(0, n), axis=axis), np.take(vp, np.arange(2, n + 2), axis=axis)


def kinetic_energy_residual(grid: MacGrid, mach: float, dt: float, mu: float, lam: float,
                            drho_prev: np.ndarray, drho: np.ndarray, u: Sequence[np.ndarray],
                            grad_p: Sequence[np.ndarray], u_tilde: Sequence[np.ndarray],
                            u_new: Sequence[np.ndarray], grad_p_new: Sequence[np.ndarray]):
    """Per-face residual of the discrete kinetic energy balance.

    Returns ``(residual, scale, remainder)`` as face fields; ``remainder`` is
    ``R = rho^{n-1}_D (u~ - u^n)**2 / (2 dt)``.
    """
    rho = 1.0 + drho
    A = ops.dual_density(grid, rho)
    B = ops.dual_density(grid, 1.0 + drho_prev)
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, rho, u))
    div_tau = ops.diffusion(grid, u_tilde, mu, lam)
    res, scale, rem = grid.face_zeros(), grid.face_zeros(), grid.face_zeros()
    for i in range(grid.d):
        m = grid.face_mask(i)
        Ai = np.where(m, A[i], 1.0)
        Bi = np.where(m, B[i], 1.0)
        ut = np.where(m, u_tilde[i], 0.0)
        terms = [
            Ai * u_new[i] ** 2 / (2 * dt),
            -Bi * u[i] ** 2 / (2 * dt),
            -div_tau[i] * ut,
            grad_p_new[i] * u_new[i] / mach**2,
            dt / mach**4 * grad_p_new[i] ** 2 / (2 * Ai),
            -dt / mach**4 * grad_p[i] ** 2 / (2 * Bi),
        ]
        R = Bi * (ut - u[i]) ** 2 / (2 * dt)
        terms.append(R)
        for k in range(grid.d):
            p_minus, p_plus = _plus_minus(P[i][k], k)
            nb_lo, nb_hi = _neighbors(ut, k)
            c = 1.0 / (2 * grid.dual_volume(i))
            terms.append(c * p_plus * ut * nb_hi)
            terms.append(-c * p_minus * ut * nb_lo)
        total = np.sum(terms, axis=0)
        abs_total = np.sum(np.abs(terms), axis=0)
        res[i] = np.where(m, total, 0.0)
        scale[i] = np.where(m, abs_total, 0.0)
        rem[i] = np.where(m, R, 0.0)
    return res, scale, rem


def dual_mass_balance_residual(grid: MacGrid, dt: float, drho_old: np.ndarray, drho_new: np.ndarray,
                               u_new: Sequence[np.ndarray]):
    """Per-dual-cell residual of the mass balance over the internal dual cells.

    Returns ``(residual, scale)`` face fields, both multiplied by ``|D_sigma|``.
    """
    rd_old = ops.dual_density(grid, drho_old)
    rd_new = ops.dual_density(grid, drho_new)
    P = ops.dual_mass_fluxes(grid, ops.mass_flux(grid, 1.0 + drho_new, u_new))
    res, scale = grid.face_zeros(), grid.face_zeros()
    for i in range(grid.d):
        m = grid.face_mask(i)
        t = grid.dual_volume(i) * (rd_new[i] - rd_old[i]) / dt
        total = t.copy()
        abs_total = np.abs(t)
        for k in range(grid.d):
            p_minus, p_plus = _plus_minus(P[i][k], k)
            total += p_plus - p_minus
            abs_total += np.abs(p_plus) + np.abs(p_minus)
        res[i] = np.where(m, total, 0.0)
        scale[i] = np.where(m, abs_total, 0.0)
    return res, scale


def renormalization_remainder(grid: MacGrid, drho: np.ndarray, drho_new: np.ndarray,
                              u_new: Sequence[np.ndarray], gamma: float, dt: float):
    """Remainder ``R_K`` of the discrete renormalization identity.

    ``R_K`` is minus the sum of the time difference of ``Pi_gamma``, the
    divergence of ``(b(rho) - b'(1) rho) u`` (upwind face values) and
    ``p_K (div u)_K``.  It is evaluated in the algebraically equivalent form
    ``dPi/dt + div(Pi(rho_up) u) + (p - 1) div u``, which uses
    ``b'(1) - b(1) = p(1) = 1`` and avoids the cancellation of O(1) terms.

    Returns ``(R, scale)`` where ``scale`` sums the absolute values of the
    terms in their literal form (each face flux counted separately).
    """
    rho_new = 1.0 + drho_new
    up_dev = ops.upwind_density(grid, drho_new, u_new)
    up = ops.upwind_density(grid, rho_new, u_new)
    dpi = (bt.pi_gamma_dev(drho_new, gamma) - bt.pi_gamma_dev(drho, gamma)) / dt
    pi_flux = []
    lit_abs = np.abs(dpi)
    for i in range(grid.d):
        m = grid.face_mask(i)
        ui = np.where(m, u_new[i], 0.0)
        pi_face = np.where(m, bt.pi_gamma_dev(np.where(m, up_dev[i], 0.0), gamma), 0.0)
        pi_flux.append(grid.face_area(i) * pi_face * ui)
        lit = np.where(m, bt.b(np.where(m, up[i], 1.0), gamma) - bt.db(1.0, gamma) * up[i], 0.0)
        flux_abs = np.abs(grid.face_area(i) * lit * ui) / grid.cell_volume
        lo, hi = _plus_minus(flux_abs, i)
        lit_abs = lit_abs + lo + hi
    div_pi = ops.flux_divergence(grid, pi_flux)
    div_u = ops.velocity_divergence(grid, u_new)
    p_exc = bt.pressure_excess(drho_new, gamma)
    R = -(dpi + div_pi + p_exc * div_u)
    lit_abs = lit_abs + np.abs((1.0 + p_exc) * div_u)
    return R, lit_abs


def pressure_fluctuation(grid: MacGrid, p: np.ndarray, mach: float) -> np.ndarray:
    """``(p - mean(p)) / Ma**2`` with an exactly zero mean (up to rounding)."""
    if not mach > 0:
        raise ValueError("Mach number must be positive")
    p = np.asarray(p, dtype=float)
    dp = p - p.mean()
    dp -= dp.mean()
    return dp / mach**2


def pressure_fluctuation_dev(grid: MacGrid, drho: np.ndarray, gamma: float, mach: float) -> np.ndarray:
    """Same as :func:`pressure_fluctuation` for ``rho = 1 + drho``, without forming ``p``."""
    return pressure_fluctuation(grid, bt.pressure_excess(drho, gamma), mach)


# -- entropy estimates ------------------------------------------------------------

def _kinetic(grid, rho_dual, u):
    total = 0.0
    for i in range(grid.d):
        sl = grid.internal_slice(i)
        total += grid.dual_volume(i) * float(np.sum(rho_dual[i][sl] * u[i][sl] ** 2))
    return 0.5 * total


def _grad_energy(grid, rho_dual, g, dt, mach):
    total = 0.0
    for i in range(grid.d):
        sl = grid.internal_slice(i)
        total += grid.dual_volume(i) * float(np.sum(g[i][sl] ** 2 / (2 * rho_dual[i][sl])))
    return dt**2 / mach**4 * total


def _pi_sum(grid, drho, gamma):
    return grid.cell_volume * float(np.sum(bt.pi_gamma_dev(drho, gamma)))


def global_entropy_terms(state) -> tuple[float, float, float, float]:
    """The four nonnegative terms of the global entropy estimate at level ``state.n``."""
    grid, prm = state.grid, state.params
    rd_prev = ops.dual_density(grid, state.rho_prev)
    return (_kinetic(grid, rd_prev, state.u),
            state.dissipation,
            _pi_sum(grid, state.drho, prm.gamma) / prm.mach**2,
            _grad_energy(grid, rd_prev, state.grad_p, prm.dt, prm.mach))


def global_entropy_lhs(state) -> float:
    return float(sum(global_entropy_terms(state)))


def initial_constant_C0(state) -> float:
    """``C0`` built from ``rho^{-1}``, ``rho^0``, ``u^0`` and ``(grad p)^0``."""
    if state.n != 0:
        raise ValueError("C0 is defined from the initial state")
    kin, _, pi, grad = global_entropy_terms(state)
    return kin + pi + grad


def local_entropy_lhs(step, new) -> tuple[float, float]:
    """Left-hand side of the local-in-time entropy inequality and its scale."""
    before, pred = step.before, step.pred
    grid, prm = before.grid, before.params
    rd_n = ops.dual_density(grid, before.rho)
    rd_prev = ops.dual_density(grid, before.rho_prev)
    terms = [
        _kinetic(grid, rd_n, new.u),
        -_kinetic(grid, rd_prev, before.u),
        _pi_sum(grid, new.drho, prm.gamma) / prm.mach**2,
        -_pi_sum(grid, before.drho, prm.gamma) / prm.mach**2,
        prm.mu * prm.dt * norm_broken_h1(grid, pred.u_tilde) ** 2,
        _grad_energy(grid, rd_n, new.grad_p, prm.dt, prm.mach),
        -_grad_energy(grid, rd_prev, before.grad_p, prm.dt, prm.mach),
    ]
    # the Pi difference is summed cellwise to keep its accuracy
    pi_diff = grid.cell_volume * float(np.sum(bt.pi_gamma_dev(new.drho, prm.gamma)
                                               - bt.pi_gamma_dev(before.drho, prm.gamma))) / prm.mach**2
    lhs = terms[0] + terms[1] + pi_diff + terms[4] + terms[5] + terms[6]
    return float(lhs), float(sum(abs(t) for t in terms))


# -- records ----------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    step: int
    time: float
    kinetic_residual: float
    kinetic_remainder_min: float
    renorm_min: float
    renorm_min_rel: float
    dual_mass_residual: float
    local_entropy: float
    local_entropy_scale: float
    global_entropy: float
    C0: float
    pi_sum: float
    dp_l2: float
    rho_dev_l2: float
    rho_dev_lq: float
    q: float
    utilde_h1: float
    dissipation: float
    total_mass: float
    min_rho: float
    newton_iterations: int
    newton_residual: float
    prediction_residual: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def step_record(step, new) -> DiagnosticsRecord:
    """Evaluate every per-step diagnostic for one advance ``step.before -> new``."""
    before, pred, corr = step.before, step.pred, step.corr
    grid, prm = before.grid, before.params

    res, scale, rem = kinetic_energy_residual(
        grid, prm.mach, prm.dt, prm.mu, prm.lam, before.drho_prev, before.drho, before.u,
        before.grad_p, pred.u_tilde, new.u, new.grad_p)
    kin_rel = 0.0
    rem_min = np.inf
    for i in range(grid.d):
        m = grid.face_mask(i)
        kin_rel = max(kin_rel, float(np.max(np.abs(res[i][m]) / np.maximum(scale[i][m], 1e-300))))
        rem_min = min(rem_min, float(rem[i][m].min()))

    R, rscale = renormalization_remainder(grid, before.drho, new.drho, new.u, prm.gamma, prm.dt)
    renorm_rel = float(np.min(R / np.maximum(rscale, 1e-300)))

    dres, dscale = dual_mass_balance_residual(grid, prm.dt, before.drho, new.drho, new.u)
    dual_rel = max(float(np.max(np.abs(dres[i][grid.face_mask(i)])
                                / np.maximum(dscale[i][grid.face_mask(i)], 1e-300))) for i in range(grid.d))

    local, local_scale = local_entropy_lhs(step, new)
    ut_h1 = norm_broken_h1(grid, pred.u_tilde)
    dissipation = prm.mu * prm.dt * ut_h1**2

    # global estimate at the new level (dissipation accumulated through this step)
    saved = new.dissipation
    new.dissipation = before.dissipation + dissipation
    glob = global_entropy_lhs(new)
    new.dissipation = saved

    q = min(prm.gamma, 2.0)
    dp = pressure_fluctuation_dev(grid, new.drho, prm.gamma, prm.mach)
    return DiagnosticsRecord(
        step=new.n,
        time=new.n * prm.dt,
        kinetic_residual=kin_rel,
        kinetic_remainder_min=rem_min,
        renorm_min=float(R.min()),
        renorm_min_rel=renorm_rel,
        dual_mass_residual=dual_rel,
        local_entropy=local,
        local_entropy_scale=local_scale,
        global_entropy=glob,
        C0=float(before.C0) if before.C0 is not None else float("nan"),
        pi_sum=_pi_sum(grid, new.drho, prm.gamma),
        dp_l2=norm_l2_cells(grid, dp),
        rho_dev_l2=norm_l2_cells(grid, new.drho),
        rho_dev_lq=norm_lq_cells(grid, new.drho, q),
        q=q,
        utilde_h1=ut_h1,
        dissipation=dissipation,
        total_mass=grid.cell_volume * float(np.sum(new.rho)),
        min_rho=float(new.rho.min()),
        newton_iterations=corr.iterations,
        newton_residual=corr.history[-1],
        prediction_residual=pred.residual,
    )


def write_records_csv(path: str | Path, records: Sequence[DiagnosticsRecord]) -> None:
    cols = DiagnosticsRecord.columns()
    with open(path, "w", newline="") as fh:
        fh.write("# columns: " + " ".join(cols) + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for rec in records:
            row = asdict(rec)
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def read_records_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(lines)]


# -- inf-sup ----------------------------------------------------------------------

MAX_INFSUP_CELLS = 32 * 32


def infsup_matrices(grid: MacGrid):
    """``(B, A, M)``: measure-weighted divergence (cells x faces), H1 Gram matrix, cell mass matrix."""
    from .assembly import Stencils

    st = Stencils(grid)
    B = grid.cell_volume * st.divergence.toarray()
    A = -(st.dual_volumes[:, None] * st.laplacian.toarray())
    M = grid.cell_volume * np.eye(grid.n_cells)
    return B, A, M


def infsup_estimate(grid: MacGrid) -> float:
    """Discrete inf-sup constant of the MAC pair for the ``||.||_{1,M}`` / zero-mean L2 norms."""
    if grid.n_cells > MAX_INFSUP_CELLS:
        raise ValueError(f"inf-sup estimator is dense; at most {MAX_INFSUP_CELLS} cells, got {grid.n_cells}")
    B, A, _ = infsup_matrices(grid)
    Rc = sla.cholesky(0.5 * (A + A.T), lower=False)
    # sup_u b(u, p) / ||u||_A = ||R^{-T} B^T p||
    W = sla.solve_triangular(Rc, B.T, trans="T", lower=False)
    Z = sla.null_space(np.ones((1, grid.n_cells)))
    return smallest_singular_value(W @ Z) / np.sqrt(grid.cell_volume)
