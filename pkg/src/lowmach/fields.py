"""Norms of discrete fields and CSV snapshots."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .grid import MacGrid
from .operators import dual_difference_terms


def norm_l2_cells(grid: MacGrid, f: np.ndarray) -> float:
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(grid.cell_volume * np.sum(f * f)))


def norm_lq_cells(grid: MacGrid, f: np.ndarray, q: float) -> float:
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(np.asarray(f, dtype=float))
    scale = a.max(initial=0.0)
    if scale == 0.0:
        return 0.0
    # scaled to avoid overflow for large q
    return float(scale * (grid.cell_volume * np.sum((a / scale) ** q)) ** (1.0 / q))


def norm_linf_cells(grid: MacGrid, f: np.ndarray) -> float:
    return float(np.abs(np.asarray(f, dtype=float)).max(initial=0.0))


def norm_l2_faces(grid: MacGrid, u: Sequence[np.ndarray]) -> float:
    """``(sum_i sum_sigma |D_sigma| u_{sigma,i}^2)^{1/2}`` over internal faces."""
    total = 0.0
    for i in range(grid.d):
        ui = u[i][grid.internal_slice(i)]
        total += grid.dual_volume(i) * float(np.sum(ui * ui))
    return float(np.sqrt(total))


def norm_broken_h1(grid: MacGrid, u: Sequence[np.ndarray]) -> float:
    """Discrete H1 norm ``||u||_{1,M}``.

    Sum over components and dual faces of ``|eps| / d_eps`` times the squared
    jump of ``u_i`` across the dual face, with zero values beyond the boundary
    (``d_eps`` is half a cell for the dual faces lying on the boundary).
    """
    total = 0.0
    for w, diff in dual_difference_terms(grid, u):
        total += float(np.sum(w * diff * diff))
    return float(np.sqrt(total))


def weighted_kinetic_energy(grid: MacGrid, rho_dual: Sequence[np.ndarray], u: Sequence[np.ndarray]) -> float:
    """``(1/2) sum_i sum_sigma |D_sigma| rho_{D_sigma} u_{sigma,i}^2``."""
    total = 0.0
    for i in range(grid.d):
        sl = grid.internal_slice(i)
        r = rho_dual[i][sl]
        if np.any(~(r > 0)):
            raise ValueError("dual density must be positive on internal faces")
        total += grid.dual_volume(i) * float(np.sum(r * u[i][sl] ** 2))
    return 0.5 * total


def write_cell_csv(path: str | Path, grid: MacGrid, values: dict[str, np.ndarray]) -> None:
    """One row per cell: index, centre coordinates, then one column per field."""
    coords = grid.cell_centers()
    names = list(values)
    axes = "xyz"[: grid.d]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell"] + [f"{a}" for a in axes] + names)
        flat = [np.asarray(values[n]).ravel() for n in names]
        cflat = [c.ravel() for c in coords]
        for idx in range(grid.n_cells):
            w.writerow([idx] + [f"{c[idx]:.17g}" for c in cflat] + [f"{f[idx]:.17g}" for f in flat])


def write_face_csv(path: str | Path, grid: MacGrid, values: dict[str, Sequence[np.ndarray]]) -> None:
    """One row per face (all axes, external faces included): axis, index within axis, centre, values."""
    names = list(values)
    axes = "xyz"[: grid.d]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "face"] + list(axes) + ["internal"] + names)
        for i in range(grid.d):
            coords = [c.ravel() for c in grid.face_centers(i)]
            mask = grid.face_mask(i).ravel()
            flat = [np.asarray(values[n][i]).ravel() for n in names]
            for idx in range(mask.size):
                w.writerow([i, idx] + [f"{c[idx]:.17g}" for c in coords] + [int(mask[idx])]
                           + [f"{f[idx]:.17g}" for f in flat])
