"""Uniform MAC (staggered) mesh on a parallelepiped.

Storage conventions used throughout the package:

* a cell field is an ndarray of shape ``grid.shape`` (one value per cell);
* a face field is a list of ``d`` ndarrays; component ``i`` has shape
  ``grid.face_shape(i)``, i.e. ``n_i + 1`` entries along axis ``i``.  Index
  ``0`` and ``n_i`` along axis ``i`` are the external faces;
* the face ``J`` of axis ``i`` separates the cells ``J - e_i`` (called K, the
  "minus" cell) and ``J`` (called L, the "plus" cell), so ``n_{K,sigma} = +e_i``.

Unknown vectors used by the linear solvers pack the internal faces of all axes,
axis by axis, each block raveled in C order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class DualFaceStencil:
    """One boundary piece ``eps`` of the dual cell ``D_sigma``.

    ``kind`` is ``"normal"`` when ``e_i`` is normal to ``eps`` (the dual face
    sits at the centre of a primal cell) and ``"tangent"`` otherwise.
    ``refs`` holds the two primal flux references as ``(axis, face_index,
    sign)``: the flux through ``eps`` outward ``D_sigma`` is
    ``0.5 * sum(sign * F_axis[face_index])`` where ``F_axis`` is the primal
    mass flux oriented along ``+e_axis``.
    """

    face: tuple[int, tuple[int, ...]]
    kind: str
    direction: int
    side: int
    neighbor: tuple[int, ...]
    refs: tuple[tuple[int, tuple[int, ...], float], ...]
    on_boundary: bool
    measure: float
    normal: tuple[float, ...]


@dataclass(frozen=True)
class MacGrid:
    """Geometry of a uniform MAC mesh ``prod_i [0, L_i]`` with ``n_i`` cells per axis."""

    dims: tuple[int, ...]
    lengths: tuple[float, ...]
    origin: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        lengths = tuple(float(x) for x in self.lengths)
        if len(dims) not in (2, 3):
            raise GridError(f"dimension must be 2 or 3, got {len(dims)}")
        if len(lengths) != len(dims):
            raise GridError("dims and lengths must have the same length")
        if any(n < 2 for n in dims):
            raise GridError(f"every axis needs at least 2 cells, got {dims}")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise GridError(f"domain lengths must be positive, got {lengths}")
        origin = self.origin
        if origin is None:
            origin = (0.0,) * len(dims)
        origin = tuple(float(x) for x in origin)
        if len(origin) != len(dims):
            raise GridError("origin must have one coordinate per axis")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    # -- basic measures ---------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.dims

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.dims))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def domain_volume(self) -> float:
        return float(np.prod(self.lengths))

    def face_area(self, axis: int) -> float:
        """``|sigma|`` for a face normal to ``e_axis``."""
        return self.cell_volume / self.h[axis]

    def dual_volume(self, axis: int) -> float:
        """``|D_sigma|`` for an internal face; equals ``|K|`` on a uniform mesh."""
        return self.cell_volume

    def half_dual_volume(self, axis: int) -> float:
        """``|D_{K,sigma}| = |K| / 2``."""
        return 0.5 * self.cell_volume

    def dual_face_area(self, axis: int, direction: int) -> float:
        """``|eps|`` for a dual face of ``D_sigma`` (sigma normal to ``axis``) normal to ``direction``."""
        return self.cell_volume / self.h[direction]

    # -- shapes -------------------------------------------------------------
    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.dims)
        s[axis] += 1
        return tuple(s)

    def internal_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.dims)
        s[axis] -= 1
        return tuple(s)

    def internal_slice(self, axis: int) -> tuple[slice, ...]:
        sl = [slice(None)] * self.d
        sl[axis] = slice(1, -1)
        return tuple(sl)

    @cached_property
    def n_internal(self) -> tuple[int, ...]:
        return tuple(int(np.prod(self.internal_shape(i))) for i in range(self.d))

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.n_internal)]))

    @property
    def n_unknowns(self) -> int:
        return self.offsets[-1]

    @cached_property
    def internal_index(self) -> tuple[np.ndarray, ...]:
        """Per axis, an integer array over the full face shape holding the packed
        unknown index of each internal face and ``-1`` on external faces."""
        out = []
        for i in range(self.d):
            idx = -np.ones(self.face_shape(i), dtype=np.int64)
            idx[self.internal_slice(i)] = self.offsets[i] + np.arange(self.n_internal[i]).reshape(
                self.internal_shape(i)
            )
            idx.setflags(write=False)
            out.append(idx)
        return tuple(out)

    # -- field helpers --------------------------------------------------------
    def cell_zeros(self) -> np.ndarray:
        return np.zeros(self.dims)

    def face_zeros(self) -> list[np.ndarray]:
        return [np.zeros(self.face_shape(i)) for i in range(self.d)]

    def pack(self, faces: Sequence[np.ndarray]) -> np.ndarray:
        """Internal-face values of a face field as one flat vector."""
        return np.concatenate([np.asarray(faces[i])[self.internal_slice(i)].ravel() for i in range(self.d)])

    def unpack(self, vec: np.ndarray) -> list[np.ndarray]:
        """Inverse of :meth:`pack`; external faces are set to zero."""
        vec = np.asarray(vec)
        if vec.shape != (self.n_unknowns,):
            raise GridError(f"expected a vector of length {self.n_unknowns}, got {vec.shape}")
        out = self.face_zeros()
        for i in range(self.d):
            out[i][self.internal_slice(i)] = vec[self.offsets[i]:self.offsets[i + 1]].reshape(self.internal_shape(i))
        return out

    def face_mask(self, axis: int) -> np.ndarray:
        """Boolean array over the full face shape, True on internal faces."""
        return self.internal_index[axis] >= 0

    # -- coordinates ----------------------------------------------------------
    def nodes(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h[axis] * np.arange(self.dims[axis] + 1)

    def centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h[axis] * (np.arange(self.dims[axis]) + 0.5)

    def cell_centers(self) -> list[np.ndarray]:
        return list(np.meshgrid(*[self.centers(k) for k in range(self.d)], indexing="ij"))

    def face_centers(self, axis: int) -> list[np.ndarray]:
        axes = [self.nodes(k) if k == axis else self.centers(k) for k in range(self.d)]
        return list(np.meshgrid(*axes, indexing="ij"))

    # -- dual mesh -----------------------------------------------------------
    def dual_faces_of(self, axis: int, index: Sequence[int]) -> list[DualFaceStencil]:
        """Stencils of the ``2 d`` dual faces bounding ``D_sigma``.

        ``index`` is the full face index of an internal face of ``axis``.
        """
        J = tuple(int(j) for j in index)
        if len(J) != self.d or not self.face_mask(axis)[J]:
            raise GridError(f"{J} is not an internal face of axis {axis}")
        out = []
        for k in range(self.d):
            for side in (-1, 1):
                nb = list(J)
                nb[k] += side
                nb = tuple(nb)
                normal = tuple(float(side) if m == k else 0.0 for m in range(self.d))
                if k == axis:
                    # eps lies at the centre of the primal cell containing it,
                    # between the two axis-i faces sigma and sigma' of that cell
                    cell = list(J)
                    if side < 0:
                        cell[axis] -= 1
                    lo = tuple(cell)
                    hi = list(cell)
                    hi[axis] += 1
                    hi = tuple(hi)
                    # n_{D,eps} . n_{cell,face} times the outward flux F_{cell,face}
                    # reduces to +F on both faces once oriented along +e_i
                    s = float(side)
                    refs = ((axis, lo, s), (axis, hi, s))
                    out.append(DualFaceStencil((axis, J), "normal", k, side, nb, refs, False,
                                               self.dual_face_area(axis, k), normal))
                else:
                    # eps is made of halves of the faces of K and L normal to e_k
                    m = J[k] + (1 if side > 0 else 0)
                    kface = list(J)
                    kface[k] = m
                    kface[axis] = J[axis] - 1
                    kK = tuple(kface)
                    kface[axis] = J[axis]
                    kL = tuple(kface)
                    on_boundary = m == 0 or m == self.dims[k]
                    s = float(side)
                    refs = ((k, kK, s), (k, kL, s))
                    out.append(DualFaceStencil((axis, J), "tangent", k, side, nb, refs, on_boundary,
                                               self.dual_face_area(axis, k), normal))
        return out


def build_grid(dims: Sequence[int], lengths: Sequence[float] | None = None,
               origin: Sequence[float] | None = None) -> MacGrid:
    """Build a uniform MAC grid; ``lengths`` defaults to the unit box."""
    dims = tuple(dims)
    if lengths is None:
        lengths = (1.0,) * len(dims)
    return MacGrid(dims, tuple(lengths), None if origin is None else tuple(origin))


def evaluate_dual_flux(stencil: DualFaceStencil, flux: Sequence[np.ndarray]) -> float:
    """Mass flux through a dual face from the primal fluxes ``flux`` (oriented along ``+e_i``)."""
    if stencil.on_boundary:
        return 0.0
    return 0.5 * sum(sign * float(flux[ax][idx]) for ax, idx, sign in stencil.refs)
