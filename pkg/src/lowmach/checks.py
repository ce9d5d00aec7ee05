"""Structural identities of the discrete operators, checked on random fields.

Each check returns a :class:`CheckResult`; ``worst`` is the largest value of
``|violation| / scale`` encountered (0 when everything holds exactly).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .barotropic import b, db, pressure
from .diagnostics import dual_mass_balance_residual, pi_gamma_bounds_check
from .fields import norm_broken_h1
from .grid import MacGrid, build_grid

DUALITY_TOL = 1e-12
COERCIVITY_TOL = 1e-12
DUAL_MASS_TOL = 1e-10
B_IDENTITY_TOL = 1e-12


@dataclass
class CheckResult:
    name: str
    ok: bool
    worst: float
    samples: int
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name}: worst={self.worst:.3e} over {self.samples} samples{extra}"


def random_velocity(grid: MacGrid, rng: np.random.Generator) -> list[np.ndarray]:
    u = grid.face_zeros()
    for i in range(grid.d):
        u[i] = np.where(grid.face_mask(i), rng.standard_normal(grid.face_shape(i)), 0.0)
    return u


def random_density(grid: MacGrid, rng: np.random.Generator, spread: float = 0.9) -> np.ndarray:
    return 1.0 + spread * rng.uniform(-1.0, 1.0, grid.shape)


def duality_check(grid: MacGrid, n: int = 100, gamma: float = 2.0, seed: int = 0) -> CheckResult:
    """``sum_K |K| p_K (div u)_K + sum_sigma |D_sigma| u_sigma (grad p)_sigma = 0``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        rho = random_density(grid, rng)
        u = random_velocity(grid, rng)
        p = pressure(rho, gamma)
        a = grid.cell_volume * p * ops.velocity_divergence(grid, u)
        g = ops.gradient(grid, p)
        terms = [a.ravel()] + [(grid.dual_volume(i) * u[i] * g[i])[grid.internal_slice(i)].ravel()
                               for i in range(grid.d)]
        allt = np.concatenate(terms)
        worst = max(worst, abs(allt.sum()) / np.abs(allt).sum())
    return CheckResult("grad-div duality", worst <= DUALITY_TOL, worst, n)


def coercivity_check(grid: MacGrid, n: int = 100, mu: float = 0.1, lam: float = 0.0,
                     seed: int = 1) -> CheckResult:
    """``-<div tau(u), u> >= mu ||u||_{1,M}^2``, up to rounding relative to the term sizes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        u = random_velocity(grid, rng)
        t = ops.diffusion(grid, u, mu, lam)
        prods = np.concatenate([(grid.dual_volume(i) * t[i] * u[i])[grid.internal_slice(i)].ravel()
                                for i in range(grid.d)])
        lhs = -prods.sum()
        rhs = mu * norm_broken_h1(grid, u) ** 2
        scale = np.abs(prods).sum() + rhs
        worst = max(worst, max(0.0, rhs - lhs) / scale)
    return CheckResult("diffusion coercivity", worst <= COERCIVITY_TOL, worst, n)


def dual_mass_check(grid: MacGrid, n: int = 20, dt: float = 1e-3, seed: int = 2) -> CheckResult:
    """Primal mass balance on random data implies the balance on every dual cell."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        drho_new = random_density(grid, rng, 0.5) - 1.0
        u = random_velocity(grid, rng)
        # old level from the implicit balance run backward
        drho = drho_new + dt * ops.mass_divergence(grid, 1.0 + drho_new, u)
        res, scale = dual_mass_balance_residual(grid, dt, drho, drho_new, u)
        for i in range(grid.d):
            m = grid.face_mask(i)
            worst = max(worst, float((np.abs(res[i][m]) / scale[i][m]).max()))
    return CheckResult("dual mass balance", worst <= DUAL_MASS_TOL, worst, n)


def b_identity_check(gammas=(1.0, 1.4, 2.0, 3.0), n: int = 10_000, seed: int = 3) -> CheckResult:
    """``rho b'(rho) - b(rho) = rho**gamma``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for g in gammas:
        rho = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
        lhs = rho * db(rho, g) - b(rho, g)
        p = pressure(rho, g)
        scale = np.abs(rho * db(rho, g)) + np.abs(b(rho, g))
        worst = max(worst, float((np.abs(lhs - p) / scale).max()))
    return CheckResult("b identity", worst <= B_IDENTITY_TOL, worst, n * len(gammas))


def pi_bounds_check(gammas=(1.0, 1.4, 2.0, 3.0), n: int = 10_000) -> CheckResult:
    reports = [pi_gamma_bounds_check(g, n_samples=n) for g in gammas]
    bad = sum(r.upper_violations + r.lower_violations + r.two_regime_violations for r in reports)
    detail = " ".join(f"C({r.gamma:g})={r.upper_constant:.4g}" for r in reports)
    return CheckResult("Pi_gamma bounds", bad == 0, float(bad), n * len(gammas), detail)


def run_all(dims=(16, 16), seed: int = 0) -> list[CheckResult]:
    grid = build_grid(dims)
    return [
        duality_check(grid, seed=seed),
        coercivity_check(grid, seed=seed + 1),
        dual_mass_check(grid, seed=seed + 2),
        b_identity_check(seed=seed + 3),
        pi_bounds_check(),
    ]
