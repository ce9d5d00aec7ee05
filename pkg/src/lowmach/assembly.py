"""Sparse matrices of the MAC operators acting on packed internal-face unknowns.

These are assembled directly from index arithmetic (not by probing the
matrix-free operators), so the two routes check each other in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .grid import MacGrid


def _neighbor_index(idx: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Packed index of the face ``J + step * e_axis`` for every face ``J`` (``-1`` when absent)."""
    out = -np.ones_like(idx)
    n = idx.shape[axis]
    src = [slice(None)] * idx.ndim
    dst = [slice(None)] * idx.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = idx[tuple(src)]
    return out


@dataclass
class Stencils:
    """Constant sparse operators of a grid."""

    grid: MacGrid

    @cached_property
    def divergence(self) -> sp.csr_matrix:
        """Cells x packed faces; ``(D u)_K = (1/|K|) sum_sigma |sigma| u_{K,sigma}``."""
        g = self.grid
        rows, cols, vals = [], [], []
        cell_id = np.arange(g.n_cells).reshape(g.shape)
        for i in range(g.d):
            idx = g.internal_index[i][g.internal_slice(i)]
            c = g.face_area(i) / g.cell_volume
            k_cells = np.take(cell_id, np.arange(0, g.dims[i] - 1), axis=i)
            l_cells = np.take(cell_id, np.arange(1, g.dims[i]), axis=i)
            rows += [k_cells.ravel(), l_cells.ravel()]
            cols += [idx.ravel(), idx.ravel()]
            vals += [np.full(idx.size, c), np.full(idx.size, -c)]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(g.n_cells, g.n_unknowns))

    @cached_property
    def gradient(self) -> sp.csr_matrix:
        """Packed faces x cells; ``(G c)_sigma = (|sigma|/|D_sigma|)(c_L - c_K)``."""
        g = self.grid
        rows, cols, vals = [], [], []
        cell_id = np.arange(g.n_cells).reshape(g.shape)
        for i in range(g.d):
            idx = g.internal_index[i][g.internal_slice(i)].ravel()
            c = g.face_area(i) / g.dual_volume(i)
            rows += [idx, idx]
            cols += [np.take(cell_id, np.arange(0, g.dims[i] - 1), axis=i).ravel(),
                     np.take(cell_id, np.arange(1, g.dims[i]), axis=i).ravel()]
            vals += [np.full(idx.size, -c), np.full(idx.size, c)]
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(g.n_unknowns, g.n_cells))

    @cached_property
    def upwind_selectors(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """``(S_K, S_L)``: packed faces x cells, picking the minus / plus cell of each face."""
        G = self.gradient
        scale = np.abs(G).max(axis=1).toarray().ravel()
        Gn = sp.diags(1.0 / scale) @ G
        S_L = Gn.multiply(Gn > 0).tocsr()
        S_K = (-Gn).multiply(-Gn > 0).tocsr()
        return S_K, S_L

    @cached_property
    def face_areas(self) -> np.ndarray:
        g = self.grid
        return np.concatenate([np.full(g.n_internal[i], g.face_area(i)) for i in range(g.d)])

    @cached_property
    def dual_volumes(self) -> np.ndarray:
        g = self.grid
        return np.concatenate([np.full(g.n_internal[i], g.dual_volume(i)) for i in range(g.d)])

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        g = self.grid
        rows, cols, vals = [], [], []
        for i in range(g.d):
            full = g.internal_index[i]
            mask = full >= 0
            me = full[mask]
            diag = np.zeros(me.size)
            for k in range(g.d):
                h2 = g.h[k] ** 2
                for step in (-1, 1):
                    nb = _neighbor_index(full, k, step)[mask]
                    if k == i:
                        # neighbours always exist; external ones carry zero
                        w = np.full(me.size, 1.0 / h2)
                    else:
                        pos = np.indices(full.shape)[k][mask]
                        at_wall = (pos == 0) if step < 0 else (pos == g.dims[k] - 1)
                        w = np.where(at_wall, 2.0 / h2, 1.0 / h2)
                    diag -= w
                    has = nb >= 0
                    rows.append(me[has])
                    cols.append(nb[has])
                    vals.append(w[has])
            rows.append(me)
            cols.append(me)
            vals.append(diag)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(g.n_unknowns, g.n_unknowns))

    @cached_property
    def grad_div(self) -> sp.csr_matrix:
        return (self.gradient @ self.divergence).tocsr()

    def diffusion(self, mu: float, lam: float) -> sp.csr_matrix:
        return (mu * self.laplacian + (mu + lam) * self.grad_div).tocsr()

    def convection(self, dual_flux: Sequence[Sequence[np.ndarray]]) -> sp.csr_matrix:
        """Matrix of ``v -> velocity_convection(dual_flux, v)`` on packed unknowns."""
        g = self.grid
        rows, cols, vals = [], [], []
        for i in range(g.d):
            full = g.internal_index[i]
            mask = full >= 0
            me = full[mask]
            diag = np.zeros(me.size)
            inv = 1.0 / g.dual_volume(i)
            for k in range(g.d):
                P = dual_flux[i][k]
                n = P.shape[k]
                sl_lo = [slice(None)] * g.d
                sl_hi = [slice(None)] * g.d
                sl_lo[k] = slice(0, n - 1)
                sl_hi[k] = slice(1, n)
                p_minus = P[tuple(sl_lo)][mask]
                p_plus = P[tuple(sl_hi)][mask]
                for step, coef in ((1, 0.5 * inv * p_plus), (-1, -0.5 * inv * p_minus)):
                    diag += coef
                    nb = _neighbor_index(full, k, step)[mask]
                    has = nb >= 0
                    rows.append(me[has])
                    cols.append(nb[has])
                    vals.append(coef[has])
            rows.append(me)
            cols.append(me)
            vals.append(diag)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(g.n_unknowns, g.n_unknowns))
