"""Variable reduction: eliminate the cell unknowns and solve for edge traces.

For trace data ``t`` (an element of B_h, one {w_b, w_g} block per edge):

* ``D_f`` solves the cell-local problems for w_0 given the traces;
* ``L_f`` reads off the local multiplier zeta_T from a_{s,T}(w_h, .) tested
  with trace-only functions (orthonormal edge bases make this a plain
  coefficient extraction);
* ``S_f`` sums the two one-sided zeta values on interior edges and is zero on
  the boundary.

S_0 (``f = 0``) is linear and, restricted to interior traces, symmetric
positive definite; the reduced system S_0 p = r is solved by matrix-free CG.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .assembly import (BoundaryData, Multiplier, TraceField, WGSpace,
                       apply_boundary_conditions)
from .schemes import Solution, as_space
from .solvers import SolverError, conjugate_gradient
from .weakops import WGField

DENSIFY_CAP = 2000


@dataclass
class _CellGroup:
    """Cells with the same number of edges, stacked for batched products."""
    cells: np.ndarray        # (nc,)
    trace_index: np.ndarray  # (nc, T) positions in the TraceField vector
    K: np.ndarray            # (nc, N, T) = A00^-1 A0t
    At0: np.ndarray          # (nc, T, N)
    Att: np.ndarray          # (nc, T, T)
    Sloc: np.ndarray         # (nc, T, T) local Schur complement Att - At0 K


class CondensedCache:
    """Per-cell factorizations shared by D_f, L_f and every S_0 application."""

    def __init__(self, space: WGSpace):
        self.space = space
        nk, nt = space.n_cell_fn, space.n_trace
        self.chol: list = []
        by_size: dict[int, list[int]] = {}
        for c, ops in enumerate(space.operators):
            M = ops.combined
            A00 = M[:nk, :nk]
            try:
                self.chol.append(sla.cho_factor(A00, lower=True))
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"v_0 block of cell {c} is not positive definite") from exc
            by_size.setdefault(ops.layout.n_edges, []).append(c)

        self.groups = []
        for _, cells in sorted(by_size.items()):
            Ks, At0s, Atts, idx = [], [], [], []
            for c in cells:
                M = space.operators[c].combined
                Ks.append(sla.cho_solve(self.chol[c], M[:nk, nk:]))
                At0s.append(M[nk:, :nk])
                Atts.append(M[nk:, nk:])
                idx.append(np.concatenate([np.arange(e * nt, (e + 1) * nt)
                                           for e in space.mesh.cells[c].edge_ids]))
            K, At0, Att = np.array(Ks), np.array(At0s), np.array(Atts)
            Sloc = Att - At0 @ K
            Sloc = 0.5 * (Sloc + Sloc.transpose(0, 2, 1))
            self.groups.append(_CellGroup(np.array(cells), np.array(idx), K, At0, Att, Sloc))

        self.n_trace_dofs = space.mesh.n_edges * nt
        interior = np.zeros((space.mesh.n_edges, nt), dtype=bool)
        interior[space.interior_edges] = True
        self.interior_mask = interior.ravel()
        self.interior_dofs = np.flatnonzero(self.interior_mask)

    def load(self, f: Callable | None, quad_order: int | None = None) -> np.ndarray | None:
        """Cell load vectors ``(n_cells, N_k)``, or ``None`` for f = 0."""
        if f is None:
            return None
        return self.space.load_vector(f, quad_order).reshape(self.space.mesh.n_cells, -1)

    def interior_w0_from_load(self, fload: np.ndarray | None, cells) -> np.ndarray | None:
        if fload is None:
            return None
        return np.array([sla.cho_solve(self.chol[c], fload[c]) for c in cells])

    def diagonal(self) -> np.ndarray:
        """Diagonal of S_0 in trace coordinates (interior and boundary)."""
        d = np.zeros(self.n_trace_dofs)
        for g in self.groups:
            np.add.at(d, g.trace_index, np.einsum("cii->ci", g.Sloc))
        return d


def build_cache(space: WGSpace) -> CondensedCache:
    return CondensedCache(space)


def local_solve_D(cache: CondensedCache, cell_id: int, traces: np.ndarray,
                  f: Callable | np.ndarray | None = None, quad_order: int | None = None) -> np.ndarray:
    """w_0 = D_f({w_b, w_g}) on one cell.

    ``traces`` are the cell's local trace coefficients (local edge order);
    ``f`` is a callable, a precomputed cell load vector, or ``None`` for 0.
    """
    space = cache.space
    nk = space.n_cell_fn
    M = space.operators[cell_id].combined
    rhs = -M[:nk, nk:] @ np.asarray(traces, dtype=float)
    if callable(f):
        from .basis import cell_quadrature
        from .weakops import cell_order
        quad = cell_quadrature(space.mesh, cell_id, quad_order or cell_order(space.k))
        psi = space.cell_basis(cell_id).eval(quad.points)
        rhs += psi @ (quad.weights * f(quad.points[:, 0], quad.points[:, 1]))
    elif f is not None:
        rhs += np.asarray(f, dtype=float)
    return sla.cho_solve(cache.chol[cell_id], rhs)


def local_multiplier_L(space: WGSpace, cell_id: int, w_local: np.ndarray) -> np.ndarray:
    """zeta_T with b_T(v, zeta_T) = a_{s,T}(w_h, v) for all trace-only v.

    Returns an ``(n_edges, n_trace)`` array in local edge order.
    """
    ops = space.operators[cell_id]
    lay = ops.layout
    zeta = ops.combined[lay.traces, :] @ np.asarray(w_local, dtype=float)
    return zeta.reshape(lay.n_edges, lay.n_trace)


def _zeta_all(cache: CondensedCache, t: np.ndarray, fload: np.ndarray | None):
    """Yield (group, zeta (nc, T)) for trace vector t."""
    for g in cache.groups:
        tl = t[g.trace_index]
        zeta = np.einsum("cij,cj->ci", g.Sloc, tl)
        w0f = cache.interior_w0_from_load(fload, g.cells)
        if w0f is not None:
            zeta += np.einsum("cij,cj->ci", g.At0, w0f)
        yield g, zeta


def apply_S(cache: CondensedCache, trace, f: Callable | np.ndarray | None = None,
            quad_order: int | None = None) -> np.ndarray:
    """S_f(trace): similarity of zeta on interior edges, zero on the boundary.

    ``trace`` is a :class:`TraceField` or its coefficient vector; ``f`` a
    callable, a precomputed ``(n_cells, N_k)`` load array, or ``None`` (S_0).
    """
    t = trace.coeffs if isinstance(trace, TraceField) else np.asarray(trace, dtype=float)
    fload = cache.load(f, quad_order) if callable(f) else f
    out = np.zeros(cache.n_trace_dofs)
    for g, zeta in _zeta_all(cache, t, fload):
        np.add.at(out, g.trace_index, zeta)
    out[~cache.interior_mask] = 0.0
    return out


def reconstruct_cells(cache: CondensedCache, t: np.ndarray, fload: np.ndarray | None) -> np.ndarray:
    """u_0 = D_f(t) on every cell, as a stacked ``(n_cells, N_k)`` array."""
    space = cache.space
    u0 = np.zeros((space.mesh.n_cells, space.n_cell_fn))
    for g in cache.groups:
        u0[g.cells] = -np.einsum("cij,cj->ci", g.K, t[g.trace_index])
        w0f = cache.interior_w0_from_load(fload, g.cells)
        if w0f is not None:
            u0[g.cells] += w0f
    return u0


def recover_multiplier(u: WGField) -> Multiplier:
    """lambda_h on interior edges from a V_h solution, as the negated left-cell
    zeta (the hybridized equations read a_s(u, v) + b(v, lambda) = (f, v_0))."""
    space = u.space
    nt = space.n_trace
    lam = np.zeros((len(space.interior_edges), nt))
    for p, e in enumerate(space.interior_edges):
        inc = space.edge_sides[e, 0]
        c = space.incidence_cell[inc]
        j = inc - space.incidence_start[c]
        lam[p] = -local_multiplier_L(space, c, u.local(c))[j]
    return Multiplier(space, lam.ravel())


def solve_schur(mesh, k: int | None = None, f: Callable | None = None,
                bc: BoundaryData | None = None, tol: float = 1e-10,
                quad_order: int | None = None, precondition: bool = True,
                max_iter: int | None = None, cache: CondensedCache | None = None) -> Solution:
    """Variable-reduction solve: r = -S_f(0) - S_0(G); CG on S_0 p = r; u_0 = D_f(p + G)."""
    space = as_space(mesh, k)
    bc = bc or BoundaryData.homogeneous()
    t0 = time.perf_counter()
    cache = cache or CondensedCache(space)
    fload = cache.load(f, quad_order)
    G = apply_boundary_conditions(bc, space, quad_order).coeffs

    # step 1
    r = -apply_S(cache, np.zeros(cache.n_trace_dofs), fload) - apply_S(cache, G)
    r_int = r[cache.interior_dofs]

    # step 2
    def op(p_int):
        p = np.zeros(cache.n_trace_dofs)
        p[cache.interior_dofs] = p_int
        return apply_S(cache, p)[cache.interior_dofs]

    diag = cache.diagonal()[cache.interior_dofs] if precondition else None
    p_int, report = conjugate_gradient(op, r_int, tol_rel=tol, max_iter=max_iter, precond=diag)
    if not report.converged:
        raise SolverError(f"reduced-system CG did not converge: {report.iterations} iterations, "
                          f"relative residual {report.residual:.3e}")

    # step 3
    t = G.copy()
    t[cache.interior_dofs] += p_int
    u0 = reconstruct_cells(cache, t, fload)
    coeffs = np.concatenate([u0.ravel(), t])
    u = WGField(space, "shared", coeffs)
    report.wall_time = time.perf_counter() - t0
    return Solution(u, "schur", report, multiplier=recover_multiplier(u),
                    info={"reduced_unknowns": len(cache.interior_dofs), "cache": cache})


def densify_S0(space_or_cache, k: int | None = None, cap: int = DENSIFY_CAP) -> np.ndarray:
    """Dense matrix of S_0 restricted to interior traces (test utility)."""
    if isinstance(space_or_cache, CondensedCache):
        cache = space_or_cache
    else:
        cache = CondensedCache(as_space(space_or_cache, k))
    n = len(cache.interior_dofs)
    if n > cap:
        raise ValueError(f"{n} interface unknowns exceed the densify cap {cap}")
    S = np.empty((n, n))
    e = np.zeros(cache.n_trace_dofs)
    for j, dof in enumerate(cache.interior_dofs):
        e[dof] = 1.0
        S[:, j] = apply_S(cache, e)[cache.interior_dofs]
        e[dof] = 0.0
    return S


def trace_to_field(cache: CondensedCache, t: np.ndarray, f=None) -> WGField:
    """w_h = {D_f(t), t} as a shared-layout field."""
    fload = cache.load(f) if callable(f) else f
    u0 = reconstruct_cells(cache, t, fload)
    return WGField(cache.space, "shared", np.concatenate([u0.ravel(), t]))
