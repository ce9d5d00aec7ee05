"""Well-prepared initial data, single runs, Mach sweeps and their CSV reports."""
from __future__ import annotations

import configparser
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .compressible import SchemeParams, SchemeState, advance, init_state
from .diagnostics import DiagnosticsRecord, pressure_fluctuation_dev, write_records_csv
from .fields import norm_broken_h1, norm_l2_cells, write_cell_csv, write_face_csv
from .grid import MacGrid, build_grid
from .incompressible import IncParams, IncState, inc_advance, inc_init_state

logger = logging.getLogger(__name__)

# per-step acceptance tolerances, relative to the scale of each identity
KINETIC_TOL = 1e-10
RENORM_TOL = 1e-12
DUAL_MASS_TOL = 1e-10
LOCAL_ENTROPY_TOL = 1e-10
GLOBAL_ENTROPY_TOL = 1e-9
MASS_TOL = 1e-11


@dataclass
class RunConfig:
    dims: tuple[int, ...] = (32, 32)
    lengths: tuple[float, ...] = (1.0, 1.0)
    gamma: float = 2.0
    mu: float = 0.1
    lam: float = 0.0
    dt: float = 5e-3
    T: float = 0.1
    machs: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    psi_amp: float = 0.5
    rho_amp: float = 0.5
    w_amp: float = 1.0
    newton_tol: float = 1e-11
    linear_tol: float = 1e-12
    output_dir: str | None = None
    snapshot_stride: int = 0
    workers: int = 1

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.lengths = tuple(float(x) for x in self.lengths)
        self.machs = tuple(float(m) for m in self.machs)
        if any(m <= 0 for m in self.machs):
            raise ValueError("Mach numbers must be positive")
        if any(b >= a for a, b in zip(self.machs, self.machs[1:])):
            raise ValueError("Mach numbers must be strictly decreasing")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"T / dt must be an integer, got {ratio}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def grid(self) -> MacGrid:
        return build_grid(self.dims, self.lengths)

    def scheme_params(self, mach: float) -> SchemeParams:
        return SchemeParams(gamma=self.gamma, mu=self.mu, lam=self.lam, mach=mach, dt=self.dt,
                            newton_tol=self.newton_tol, linear_tol=self.linear_tol)

    def inc_params(self) -> IncParams:
        return IncParams(mu=self.mu, lam=self.lam, dt=self.dt, linear_tol=self.linear_tol)

    # -- config files ----------------------------------------------------------
    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        """Read ``key = value`` lines (``[section]`` headers are only grouping)."""
        cp = configparser.ConfigParser()
        cp.optionxform = str  # keys are field names, "T" included
        with open(path) as fh:
            cp.read_file(fh)
        values: dict = {}
        for section in cp.sections():
            for key, raw in cp.items(section):
                values[key] = raw
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"unknown configuration key {key!r}")
            kwargs[key] = _parse_value(key, raw)
        return cls(**kwargs)


def _parse_value(key: str, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key in ("dims",):
        return tuple(int(x) for x in raw.replace(",", " ").split())
    if key in ("lengths", "machs"):
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if key in ("snapshot_stride", "workers"):
        return int(raw)
    if key == "output_dir":
        return raw or None
    return float(raw)


# -- initial data -----------------------------------------------------------------

@dataclass
class InitialData:
    drho0: np.ndarray
    u0: list[np.ndarray]
    u_bar: list[np.ndarray]
    dp_limit: np.ndarray

    @property
    def rho0(self) -> np.ndarray:
        return 1.0 + self.drho0


def stream_function_velocity(grid: MacGrid, amplitude: float) -> list[np.ndarray]:
    """Discretely divergence-free velocity from a stream function (2D) or vector potential (3D).

    The potential ``amplitude * prod_m sin^2(pi x_m / L_m)`` vanishes on the
    boundary, so the normal velocity does too.  Face values are circulations of
    the potential around the face divided by ``|sigma|``, hence the discrete
    divergence telescopes to zero.
    """
    L = grid.lengths

    def potential(coords):
        out = amplitude * np.ones_like(coords[0])
        for m, c in enumerate(coords):
            out = out * np.sin(np.pi * (c - grid.origin[m]) / L[m]) ** 2
        return out

    u = grid.face_zeros()
    if grid.d == 2:
        X, Y = np.meshgrid(grid.nodes(0), grid.nodes(1), indexing="ij")
        psi = potential([X, Y])
        u[0] = np.diff(psi, axis=1) / grid.h[1]
        u[1] = -np.diff(psi, axis=0) / grid.h[0]
    else:
        # edge-located potential: component k sits on edges parallel to e_k
        a = []
        for k in range(3):
            axes = [grid.centers(m) if m == k else grid.nodes(m) for m in range(3)]
            a.append(potential(np.meshgrid(*axes, indexing="ij")))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            u[i] = np.diff(a[k], axis=j) / grid.h[j] - np.diff(a[j], axis=k) / grid.h[k]
    for i in range(grid.d):
        u[i][~grid.face_mask(i)] = 0.0
    return u


def gradient_velocity(grid: MacGrid, amplitude: float) -> list[np.ndarray]:
    """Irrotational field ``amplitude * grad prod_m cos(pi x_m / L_m)``; zero normal component on the boundary."""
    L = grid.lengths
    w = grid.face_zeros()
    for i in range(grid.d):
        coords = grid.face_centers(i)
        val = -amplitude * np.pi / L[i] * np.sin(np.pi * (coords[i] - grid.origin[i]) / L[i])
        for m in range(grid.d):
            if m != i:
                val = val * np.cos(np.pi * (coords[m] - grid.origin[m]) / L[m])
        w[i] = np.where(grid.face_mask(i), val, 0.0)
    return w


def density_shape(grid: MacGrid) -> np.ndarray:
    s = np.ones(grid.shape)
    for m, c in enumerate(grid.cell_centers()):
        s = s * np.sin(2 * np.pi * (c - grid.origin[m]) / grid.lengths[m])
    return s


def well_prepared_data(mach: float, grid: MacGrid, psi_amp: float = 0.5, rho_amp: float = 0.5,
                       w_amp: float = 1.0, gamma: float = 2.0) -> InitialData:
    """Initial data with ``rho0 - 1 = O(Ma^2)`` and ``div u0 = O(Ma)``.

    ``u0`` is the discretely solenoidal stream-function field plus ``Ma`` times
    an irrotational field; ``rho0 = 1 + Ma^2 B prod sin(2 pi x_m / L_m)``.
    ``dp_limit`` is the Ma -> 0 limit of ``(p0 - mean p0) / Ma^2``.
    """
    if not mach > 0:
        raise ValueError("Mach number must be positive")
    if not mach**2 * abs(rho_amp) < 1.0:
        raise ValueError("density amplitude makes rho0 nonpositive")
    s = density_shape(grid)
    drho0 = mach**2 * rho_amp * s
    u_bar = stream_function_velocity(grid, psi_amp)
    w = gradient_velocity(grid, w_amp)
    u0 = [u_bar[i] + mach * w[i] for i in range(grid.d)]
    dp_limit = gamma * rho_amp * (s - s.mean())
    return InitialData(drho0, u0, u_bar, dp_limit - dp_limit.mean())


def initial_scaling_ratios(state: SchemeState) -> tuple[float, float, float]:
    """``max|rho0 - 1| / Ma^2``, ``max|(grad p)^0| / Ma^2``, ``max|rho^{-1} - 1| / Ma``."""
    ma = state.params.mach
    g = max(float(np.abs(gi).max()) for gi in state.grad_p)
    return (float(np.abs(state.drho).max()) / ma**2, g / ma**2, float(np.abs(state.drho_prev).max()) / ma)


# -- runs -------------------------------------------------------------------------

@dataclass
class RunResult:
    mach: float
    initial: SchemeState | None
    final: SchemeState | None
    records: list[DiagnosticsRecord]
    init_ratios: tuple[float, float, float]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _mach_tag(mach: float) -> str:
    return f"{mach:.0e}"


def run_compressible(config: RunConfig, mach: float, output_dir: str | Path | None = None) -> RunResult:
    grid = config.grid()
    data = well_prepared_data(mach, grid, config.psi_amp, config.rho_amp, config.w_amp, config.gamma)
    state = init_state(grid, config.scheme_params(mach), data.u0, drho0=data.drho0)
    initial = state
    error = None
    out = Path(output_dir) if output_dir else (Path(config.output_dir) if config.output_dir else None)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        _write_snapshot(out, grid, mach, state)
    for _ in range(config.n_steps):
        try:
            state = advance(state)
        except Exception as exc:  # abort the run, keep what we have
            error = f"step {state.n + 1}: {exc}"
            logger.error("Ma=%g failed at %s", mach, error)
            break
        if out and config.snapshot_stride and state.n % config.snapshot_stride == 0:
            _write_snapshot(out, grid, mach, state)
    if out:
        write_records_csv(out / f"diagnostics_{_mach_tag(mach)}.csv", state.records)
    return RunResult(mach, initial, state, list(state.records), initial_scaling_ratios(initial), error)


def _write_snapshot(out: Path, grid: MacGrid, mach: float, state: SchemeState) -> None:
    tag = f"{_mach_tag(mach)}_{state.n:05d}"
    dp = pressure_fluctuation_dev(grid, state.drho, state.params.gamma, mach)
    write_cell_csv(out / f"fields_{tag}.csv", grid, {"rho": state.rho, "drho": state.drho, "dp": dp})
    write_face_csv(out / f"fields_{tag}_faces.csv", grid, {"u": state.u, "grad_p": state.grad_p})


def run_incompressible(config: RunConfig) -> list[IncState]:
    """Limit scheme from ``u_bar`` and the limit pressure fluctuation; returns every time level."""
    grid = config.grid()
    data = well_prepared_data(1.0, grid, config.psi_amp, config.rho_amp, config.w_amp, config.gamma)
    state = inc_init_state(grid, config.inc_params(), data.u_bar, data.dp_limit)
    levels = [state]
    for _ in range(config.n_steps):
        state = inc_advance(state)
        levels.append(state)
    return levels


def check_records(records: Sequence[DiagnosticsRecord], mach: float | None = None) -> dict[str, bool]:
    """Per-step tolerances of a compressible run (``mach`` enables the Pi-sum bound)."""
    if not records:
        return {"has_steps": False}
    m0 = records[0].total_mass
    out = {
        "kinetic_identity": all(r.kinetic_residual <= KINETIC_TOL for r in records),
        "kinetic_remainder_nonnegative": all(r.kinetic_remainder_min >= 0.0 for r in records),
        "renormalization_remainder": all(r.renorm_min_rel >= -RENORM_TOL for r in records),
        "dual_mass_balance": all(r.dual_mass_residual <= DUAL_MASS_TOL for r in records),
        "local_entropy": all(r.local_entropy <= LOCAL_ENTROPY_TOL * r.local_entropy_scale for r in records),
        "global_entropy": all(r.global_entropy <= r.C0 + GLOBAL_ENTROPY_TOL * max(1.0, r.C0) for r in records),
        "positivity": all(r.min_rho > 0 for r in records),
        "mass_conservation": all(abs(r.total_mass - m0) <= MASS_TOL * abs(m0) for r in records),
    }
    if mach is not None:
        out["pi_sum_bound"] = all(r.pi_sum <= r.C0 * mach**2 * (1 + GLOBAL_ENTROPY_TOL) for r in records)
    return out


# -- sweeps -----------------------------------------------------------------------

@dataclass
class SweepEntry:
    mach: float
    ok: bool
    error: str
    max_rho_dev_l2: float
    max_rho_dev_lq: float
    max_dp_l2: float
    max_global_entropy: float
    C0: float
    u_diff_h1: float
    dp_diff_l2: float
    ratio_rho0: float
    ratio_gradp0: float
    ratio_rho_prev: float
    checks_passed: bool


@dataclass
class SweepReport:
    entries: list[SweepEntry]
    order_rho_l2: float
    order_rho_lq: float
    q: float
    inc_final: IncState | None = field(default=None, repr=False)

    @property
    def machs(self) -> list[float]:
        return [e.mach for e in self.entries]


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x`` (needs at least 3 points)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("an order needs at least 3 points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _run_one(args):
    config, mach = args
    try:
        return run_compressible(config, mach)
    except Exception as exc:  # bad data for this Ma: mark it and move on
        logger.error("Ma=%g could not start: %s", mach, exc)
        nan = float("nan")
        return RunResult(mach, None, None, [], (nan, nan, nan), f"initialization: {exc}")


def mach_sweep(config: RunConfig) -> SweepReport:
    if len(config.machs) < 3:
        raise ValueError("a sweep needs at least 3 Mach numbers")
    jobs = [(config, m) for m in config.machs]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    inc_levels = run_incompressible(config)
    inc_final = inc_levels[-1]
    grid = config.grid()
    entries = []
    for res in results:
        recs = res.records
        if recs:
            fin = res.final
            u_diff = [fin.u[i] - inc_final.u[i] for i in range(grid.d)]
            dp = pressure_fluctuation_dev(grid, fin.drho, config.gamma, res.mach)
            u_err = norm_broken_h1(grid, u_diff) if res.ok else float("nan")
            dp_err = norm_l2_cells(grid, dp - inc_final.dp) if res.ok else float("nan")
        else:
            u_err = dp_err = float("nan")
        nan = float("nan")
        entries.append(SweepEntry(
            mach=res.mach,
            ok=res.ok,
            error=res.error or "",
            max_rho_dev_l2=max((r.rho_dev_l2 for r in recs), default=nan),
            max_rho_dev_lq=max((r.rho_dev_lq for r in recs), default=nan),
            max_dp_l2=max((r.dp_l2 for r in recs), default=nan),
            max_global_entropy=max((r.global_entropy for r in recs), default=nan),
            C0=res.initial.C0 if res.initial is not None else float("nan"),
            u_diff_h1=u_err,
            dp_diff_l2=dp_err,
            ratio_rho0=res.init_ratios[0],
            ratio_gradp0=res.init_ratios[1],
            ratio_rho_prev=res.init_ratios[2],
            checks_passed=res.ok and all(check_records(recs, res.mach).values()),
        ))
    good = [e for e in entries if e.ok]
    q = min(config.gamma, 2.0)
    if len(good) >= 3:
        order_l2 = loglog_slope([e.mach for e in good], [e.max_rho_dev_l2 for e in good])
        order_lq = loglog_slope([e.mach for e in good], [e.max_rho_dev_lq for e in good])
    else:
        order_l2 = order_lq = float("nan")
    report = SweepReport(entries, order_l2, order_lq, q, inc_final)
    if config.output_dir:
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
        write_sweep_csv(Path(config.output_dir) / "sweep_report.csv", report)
    return report


def write_sweep_csv(path: str | Path, report: SweepReport) -> None:
    cols = [f.name for f in fields(SweepEntry)]
    with open(path, "w", newline="") as fh:
        fh.write(f"# order_rho_l2 = {report.order_rho_l2!r}\n")
        fh.write(f"# order_rho_lq = {report.order_rho_lq!r}\n")
        fh.write(f"# q = {report.q!r}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for e in report.entries:
            row = asdict(e)
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])


def sweep_checks(report: SweepReport) -> dict[str, bool]:
    """Cross-Mach conclusions of the low Mach analysis at fixed mesh and time step."""
    e = report.entries
    ok_runs = all(x.ok and x.checks_passed for x in e)
    u_diffs = [x.u_diff_h1 for x in e]
    ratios = np.array([[x.ratio_rho0, x.ratio_gradp0, x.ratio_rho_prev] for x in e])
    spread = ratios.max(axis=0) / ratios.min(axis=0)
    return {
        "all_runs_within_tolerance": ok_runs,
        "density_order": report.order_rho_l2 >= 0.9,
        "velocity_converges_monotonically": all(b < a for a, b in zip(u_diffs, u_diffs[1:])),
        "velocity_limit_5_percent": u_diffs[-1] <= 0.05 * u_diffs[0],
        "pressure_fluctuation_bounded": e[-1].max_dp_l2 <= 2.0 * e[0].max_dp_l2,
        "initial_ratios_stable": bool(np.all(spread < 2.0)),
    }
