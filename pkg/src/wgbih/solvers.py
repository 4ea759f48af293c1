"""Dense factorizations and preconditioned conjugate gradients."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    wall_time: float
    method: str = "cg"


def dense_solve(matrix, rhs) -> np.ndarray:
    """LU with partial pivoting; rejects pivots below 1e-13 * ||A||."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SolverError("dense_solve needs a square matrix")
    with warnings.catch_warnings():
        # singularity is reported below through the pivot test
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    scale = np.abs(A).max()
    if scale == 0.0 or np.abs(np.diag(lu)).min() <= 1e-13 * scale:
        raise SolverError("matrix is singular to working precision")
    return sla.lu_solve((lu, piv), rhs)


def cholesky_factor(matrix):
    try:
        return sla.cho_factor(np.asarray(matrix, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError("non-positive pivot: matrix is not symmetric positive definite") from exc


def cholesky_solve(matrix, rhs) -> np.ndarray:
    return sla.cho_solve(cholesky_factor(matrix), rhs)


def conjugate_gradient(apply: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
                       tol_rel: float = 1e-10, max_iter: int | None = None,
                       precond: np.ndarray | None = None,
                       x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned CG for a symmetric positive definite operator.

    ``precond`` is the diagonal of the operator (Jacobi scaling).  Convergence
    is declared on the true residual ``||b - A x|| <= tol_rel * ||b||``, which is
    recomputed whenever the recurrence residual says we are done.  A
    non-positive curvature ``p.Ap <= 0`` raises :class:`SolverError`.
    """
    t0 = time.perf_counter()
    b = np.asarray(rhs, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = max(10, int(50 * np.sqrt(n)))
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        x[:] = 0.0
        return x, SolveReport(0, 0.0, True, time.perf_counter() - t0)
    inv_diag = None
    if precond is not None:
        d = np.asarray(precond, dtype=float)
        if np.any(d <= 0):
            raise SolverError("diagonal preconditioner has non-positive entries")
        inv_diag = 1.0 / d

    r = b - apply(x) if x0 is not None else b.copy()
    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = r @ z
    it = 0
    while it < max_iter:
        Ap = apply(p)
        curv = p @ Ap
        if curv <= 0.0:
            raise SolverError(f"CG breakdown at iteration {it}: p.Ap = {curv:g} (operator not SPD)")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        it += 1
        if np.linalg.norm(r) <= tol_rel * bnorm:
            r = b - apply(x)  # guard against recurrence drift
            if np.linalg.norm(r) <= tol_rel * bnorm:
                break
        z = r * inv_diag if inv_diag is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - apply(x)) / bnorm
    return x, SolveReport(it, float(res), bool(res <= tol_rel), time.perf_counter() - t0)
