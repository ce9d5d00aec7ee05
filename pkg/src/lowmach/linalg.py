"""Sparse solves and small dense decompositions."""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DIRECT_LIMIT = 20_000


class LinearSolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def is_symmetric(A, rtol: float = 1e-14) -> bool:
    A = sp.csr_matrix(A)
    diff = abs(A - A.T)
    scale = abs(A).max() if A.nnz else 0.0
    return diff.nnz == 0 or diff.max() <= rtol * scale


def solve(A, b, tol: float = DEFAULT_TOL, max_iter: int = 1000, symmetric: bool | None = None,
          method: str = "auto") -> np.ndarray:
    """Solve ``A x = b`` with ``||A x - b|| <= tol * max(1, ||b||)``.

    ``method`` is ``"direct"``, ``"krylov"`` or ``"auto"`` (direct below
    ``DIRECT_LIMIT`` unknowns).  Krylov solves use conjugate gradients when
    ``A`` is symmetric (positive definiteness is the caller's promise) and
    ILU-preconditioned GMRES otherwise; the iteration starts from zero.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"incompatible shapes {A.shape} and {b.shape}")
    bnorm = float(np.linalg.norm(b))
    target = tol * max(1.0, bnorm)
    if method == "auto":
        method = "direct" if n < DIRECT_LIMIT else "krylov"

    if method == "direct":
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
        r = b - A @ x
        # a couple of refinement sweeps absorb the factorization error on stiff systems
        for _ in range(3):
            if np.linalg.norm(r) <= target:
                break
            x += lu.solve(r)
            r = b - A @ x
    elif method == "krylov":
        if symmetric is None:
            symmetric = is_symmetric(A)
        rtol = target / bnorm if bnorm > 0 else 0.0
        if bnorm == 0:
            return np.zeros(n)
        if symmetric:
            x, info = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=max_iter)
        else:
            ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
            M = spla.LinearOperator(A.shape, ilu.solve)
            x, info = spla.gmres(A, b, rtol=rtol, atol=0.0, restart=100, maxiter=max_iter, M=M)
        r = b - A @ x
        if info != 0 and np.linalg.norm(r) > target:
            raise LinearSolverError(f"Krylov solver did not converge in {max_iter} iterations",
                                    float(np.linalg.norm(r)))
    else:
        raise ValueError(f"unknown method {method!r}")

    res = float(np.linalg.norm(r))
    if not res <= target:
        raise LinearSolverError("linear solve missed its residual target", res)
    return x


def smallest_singular_value(A) -> float:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    return float(sla.svdvals(A).min())
