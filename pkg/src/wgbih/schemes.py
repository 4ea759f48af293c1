"""End-to-end WG and hybridized WG solves and the equivalence cross-check."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import (BoundaryData, Multiplier, WGSpace, assemble_hwg, assemble_wg,
                       global_matrix, jump)
from .mesh import Mesh
from .solvers import SolveReport, SolverError, conjugate_gradient, dense_solve
from .weakops import WGField

DENSE_CAP = 6000
SCHEMES = ("wg", "hwg-dense", "schur")


@dataclass
class Solution:
    u: WGField                       # shared-trace layout
    scheme: str
    report: SolveReport
    multiplier: Multiplier | None = None
    max_jump: float = 0.0            # HWG only: largest interior jump coefficient
    info: dict = field(default_factory=dict)

    @property
    def space(self) -> WGSpace:
        return self.u.space


def as_space(mesh_or_space, k: int | None = None) -> WGSpace:
    if isinstance(mesh_or_space, WGSpace):
        if k is not None and k != mesh_or_space.k:
            raise ValueError("degree k does not match the given space")
        return mesh_or_space
    if not isinstance(mesh_or_space, Mesh):
        raise TypeError("expected a Mesh or a WGSpace")
    return WGSpace(mesh_or_space, 2 if k is None else k)


def solve_wg(mesh, k: int | None = None, f: Callable | None = None,
             bc: BoundaryData | None = None, solver: str = "cg", tol: float = 1e-10,
             quad_order: int | None = None, max_iter: int | None = None) -> Solution:
    """Solve a_s(u, v) = (f, v_0) on V_h^0 with the boundary lift attached.

    ``solver`` is ``"cg"`` (Jacobi-preconditioned CG) or ``"dense"`` (LU).
    """
    space = as_space(mesh, k)
    f = f or (lambda x, y: np.zeros_like(x))
    bc = bc or BoundaryData.homogeneous()
    system = assemble_wg(space, f, bc, quad_order)
    t0 = time.perf_counter()
    if solver == "cg":
        A = system.matrix
        x, report = conjugate_gradient(lambda v: A @ v, system.rhs, tol_rel=tol,
                                       max_iter=max_iter, precond=A.diagonal())
        if not report.converged:
            raise SolverError(f"CG did not converge: {report.iterations} iterations, "
                              f"relative residual {report.residual:.3e}")
    elif solver == "dense":
        x = dense_solve(system.matrix.toarray(), system.rhs)
        res = np.linalg.norm(system.matrix @ x - system.rhs) / max(np.linalg.norm(system.rhs), 1e-300)
        report = SolveReport(1, float(res), True, time.perf_counter() - t0, method="dense-lu")
    else:
        raise ValueError(f"unknown solver {solver!r} (use 'cg' or 'dense')")
    coeffs = system.lift.copy()
    coeffs[system.free] = x
    return Solution(WGField(space, "shared", coeffs), "wg", report,
                    info={"unknowns": len(system.free)})


def solve_hwg_dense(mesh, k: int | None = None, f: Callable | None = None,
                    bc: BoundaryData | None = None, quad_order: int | None = None,
                    cap: int = DENSE_CAP) -> Solution:
    """Solve the full hybridized saddle system by dense LU (small meshes only)."""
    space = as_space(mesh, k)
    f = f or (lambda x, y: np.zeros_like(x))
    bc = bc or BoundaryData.homogeneous()
    system = assemble_hwg(space, f, bc, quad_order)
    size = system.matrix.shape[0]
    if size > cap:
        raise SolverError(f"saddle system has {size} unknowns > dense cap {cap}; use the schur scheme")
    t0 = time.perf_counter()
    K = system.matrix.toarray()
    x = dense_solve(K, system.rhs)
    res = np.linalg.norm(K @ x - system.rhs) / max(np.linalg.norm(system.rhs), 1e-300)
    report = SolveReport(1, float(res), True, time.perf_counter() - t0, method="dense-lu")

    nf = len(system.free)
    two_sided = system.lift.copy()
    two_sided[system.free] = x[:nf]
    u2 = WGField(space, "two-sided", two_sided)
    lam = Multiplier(space, x[nf:])
    jumps = [np.abs(jump(u2, e)).max() for e in space.interior_edges]
    u = WGField(space, "shared", space.two_sided_to_shared(two_sided))
    return Solution(u, "hwg-dense", report, multiplier=lam,
                    max_jump=float(max(jumps, default=0.0)),
                    info={"unknowns": size, "two_sided": u2})


@dataclass
class EquivalenceReport:
    max_coeff_diff: float
    rel_coeff_diff: float
    energy_diff: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.rel_coeff_diff <= self.tol


def check_equivalence(sol_a: Solution, sol_b: Solution, tol: float = 1e-8) -> EquivalenceReport:
    """Coefficient and energy-norm discrepancy between two solutions."""
    sa, sb = sol_a.space, sol_b.space
    if sa.n_shared != sb.n_shared or sa.k != sb.k:
        raise ValueError("solutions live on different layouts")
    d = sol_a.u.coeffs - sol_b.u.coeffs
    scale = max(np.abs(sol_a.u.coeffs).max(), np.abs(sol_b.u.coeffs).max(), 1e-300)
    diff = WGField(sa, "shared", d)
    energy = np.sqrt(max(sa.a_s(diff, diff), 0.0))
    return EquivalenceReport(float(np.abs(d).max()), float(np.abs(d).max() / scale),
                             float(energy), tol)


def galerkin_residual(sol: Solution, f: Callable, quad_order: int | None = None) -> np.ndarray:
    """a_s(u_h, v) - (f, v_0) for every basis function v of V_h^0."""
    space = sol.space
    A = global_matrix(space, "shared")
    F = np.zeros(space.n_shared)
    F[: space.n_cell_dofs] = space.load_vector(f, quad_order)
    r = A @ sol.u.coeffs - F
    return r[~space.shared_boundary_mask()]


def saddle_matrix_nonsingular(space: WGSpace) -> bool:
    """Dense LU oracle for the hybridized saddle matrix."""
    system = assemble_hwg(space, lambda x, y: np.zeros_like(x), BoundaryData.homogeneous())
    try:
        dense_solve(system.matrix.toarray(), np.ones(system.matrix.shape[0]))
    except SolverError:
        return False
    return True

