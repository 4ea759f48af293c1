"""Manufactured solutions, discrete norms, the consistency functional and
convergence studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy

from .assembly import BoundaryData, Multiplier, WGSpace
from .basis import dim_p, edge_basis, edge_quadrature
from .mesh import Mesh
from .weakops import WGField, project_cell, project_edge, project_Qh


@dataclass
class ManufacturedSolution:
    """Closures for u and the derivatives the solver and the error analysis need.

    Vector-valued closures return ``(m, 2)`` arrays, the Hessian ``(m, 2, 2)``.
    """
    id: str
    u: Callable
    grad: Callable
    hess: Callable
    lap: Callable
    grad_lap: Callable
    f: Callable
    regularity: str = "C-infinity"
    expr: object = None

    def boundary_data(self) -> BoundaryData:
        return BoundaryData.from_solution(self.u, self.grad)

    def consistency_errors(self, n_points: int = 20, seed: int = 0) -> dict[str, float]:
        """Relative mismatch of central differences against the closures at
        random interior points: grad vs u, grad_lap vs lap, f vs lap."""
        rng = np.random.default_rng(seed)
        pts = 0.1 + 0.8 * rng.random((n_points, 2))
        x, y = pts[:, 0], pts[:, 1]

        def fd_grad(fn, h=1e-5):
            return np.column_stack([(fn(x + h, y) - fn(x - h, y)) / (2 * h),
                                    (fn(x, y + h) - fn(x, y - h)) / (2 * h)])

        def fd_lap(fn, h=1e-3):
            c = 4 * fn(x, y)
            return (fn(x + h, y) + fn(x - h, y) + fn(x, y + h) + fn(x, y - h) - c) / h**2

        def rel(a, b):
            return float(np.abs(a - b).max() / max(np.abs(b).max(), 1.0))

        return {
            "grad": rel(fd_grad(self.u), self.grad(x, y)),
            "grad_lap": rel(fd_grad(self.lap), self.grad_lap(x, y)),
            "f": rel(fd_lap(self.lap), self.f(x, y)),
        }


_X, _Y = sympy.symbols("x y", real=True)


def _vectorize(expr):
    fn = sympy.lambdify((_X, _Y), expr, "numpy")

    def call(x, y):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x, np.asarray(y, dtype=float)), dtype=float), x.shape).copy()
    return call


def from_sympy(expr, ident: str, regularity: str = "C-infinity") -> ManufacturedSolution:
    """Build a manufactured solution from a sympy expression in ``x, y``."""
    expr = sympy.sympify(expr)
    gx, gy = sympy.diff(expr, _X), sympy.diff(expr, _Y)
    hxx, hxy, hyy = sympy.diff(gx, _X), sympy.diff(gx, _Y), sympy.diff(gy, _Y)
    lap = hxx + hyy
    lx, ly = sympy.diff(lap, _X), sympy.diff(lap, _Y)
    f = sympy.simplify(sympy.diff(lap, _X, 2) + sympy.diff(lap, _Y, 2))
    fu, fgx, fgy = _vectorize(expr), _vectorize(gx), _vectorize(gy)
    fxx, fxy, fyy = _vectorize(hxx), _vectorize(hxy), _vectorize(hyy)
    flx, fly = _vectorize(lx), _vectorize(ly)

    def grad(x, y):
        return np.stack([fgx(x, y), fgy(x, y)], axis=-1)

    def hess(x, y):
        a, b, c = fxx(x, y), fxy(x, y), fyy(x, y)
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    def grad_lap(x, y):
        return np.stack([flx(x, y), fly(x, y)], axis=-1)

    return ManufacturedSolution(ident, fu, grad, hess, _vectorize(lap), grad_lap,
                                _vectorize(f), regularity, expr)


def manufactured(ident: str) -> ManufacturedSolution:
    """Shipped solutions: ``sin`` (a), ``bubble`` (b), ``poly2``."""
    x, y, pi = _X, _Y, sympy.pi
    table = {
        "sin": sympy.sin(pi * x) * sympy.sin(pi * y),
        "a": sympy.sin(pi * x) * sympy.sin(pi * y),
        "bubble": x**2 * (1 - x)**2 * y**2 * (1 - y)**2,
        "b": x**2 * (1 - x)**2 * y**2 * (1 - y)**2,
        "poly2": x**2 + x * y - y**2,
    }
    if ident not in table:
        raise KeyError(f"unknown manufactured solution {ident!r}; choose from {sorted(table)}")
    canonical = {"a": "sin", "b": "bubble"}.get(ident, ident)
    return from_sympy(table[ident], canonical)


def polynomial_solution(coeffs: np.ndarray, ident: str = "poly") -> ManufacturedSolution:
    """u = sum_ab coeffs[a, b] x^a y^b."""
    expr = sum(sympy.Float(float(coeffs[a, b])) * _X**a * _Y**b
               for a in range(coeffs.shape[0]) for b in range(coeffs.shape[1]) if coeffs[a, b] != 0)
    return from_sympy(expr, ident, regularity="polynomial")


def random_polynomial(degree: int, rng: np.random.Generator) -> ManufacturedSolution:
    c = np.zeros((degree + 1, degree + 1))
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            c[a, b] = rng.standard_normal()
    return polynomial_solution(c, f"random-p{degree}")


# -- multipliers ------------------------------------------------------------

def exact_multiplier(ms: ManufacturedSolution, mesh: Mesh, edge_id: int, side: str = "L",
                     points: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """lambda_b = grad(lap u).n and lambda_g = -H(u) n at points of the edge,
    with n the outward normal of the requested side's cell."""
    edge = mesh.edges[edge_id]
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    if side == "R" and edge.is_boundary:
        raise ValueError("boundary edges have no right side")
    n = edge.normal if side == "L" else -edge.normal
    if points is None:
        points = edge_quadrature(mesh, edge_id, 8).points
    x, y = points[:, 0], points[:, 1]
    lam_b = ms.grad_lap(x, y) @ n
    lam_g = -(ms.hess(x, y) @ n)
    return lam_b, lam_g


def project_multiplier(ms: ManufacturedSolution, space: WGSpace,
                       quad_order: int | None = None) -> Multiplier:
    """Q_h lambda on interior edges, stored as the left-side value."""
    mesh, k = space.mesh, space.k
    out = np.zeros((len(space.interior_edges), space.n_trace))
    for p, e in enumerate(space.interior_edges):
        n = mesh.edges[e].normal
        out[p, :k - 1] = project_edge(lambda x, y: ms.grad_lap(x, y) @ n, mesh, e, k - 2, quad_order)
        g = project_edge(lambda x, y: -(ms.hess(x, y) @ n), mesh, e, k - 2, quad_order)
        out[p, k - 1:] = g.ravel()
    return Multiplier(space, out.ravel())


# -- norms ------------------------------------------------------------------

def energy_norm(v: WGField) -> float:
    """|||v||| = a_s(v, v)^(1/2)."""
    return math.sqrt(max(v.space.a_s(v, v), 0.0))


def xi_norm(lam: Multiplier) -> float:
    """(sum_e h_e^3 ||lambda_b||_e^2 + h_e ||lambda_g||_e^2)^(1/2) over interior edges."""
    space = lam.space
    nb = space.n_edge_fn
    blocks = lam.coeffs.reshape(-1, space.n_trace)
    he = np.array([space.mesh.edges[e].length for e in space.interior_edges])
    total = he**3 * (blocks[:, :nb] ** 2).sum(axis=1) + he * (blocks[:, nb:] ** 2).sum(axis=1)
    return math.sqrt(float(total.sum()))


def xi_error_exact(ms: ManufacturedSolution, lam: Multiplier, quad_order: int | None = None) -> float:
    """||lambda - lambda_h||_{Xi_h} by edge quadrature (left-side values)."""
    space = lam.space
    mesh, k, nb = space.mesh, space.k, space.n_edge_fn
    total = 0.0
    for e in space.interior_edges:
        edge = mesh.edges[e]
        quad = edge_quadrature(mesh, e, quad_order or 2 * k + 6)
        chi = edge_basis(mesh, e, k - 2).eval(quad.params)
        lb, lg = exact_multiplier(ms, mesh, e, "L", quad.points)
        c = lam.on_edge(e)
        db = lb - c[:nb] @ chi
        dg = lg - np.column_stack([c[nb:2 * nb] @ chi, c[2 * nb:] @ chi])
        total += edge.length**3 * quad.integrate(db**2) + edge.length * quad.integrate((dg**2).sum(axis=1))
    return math.sqrt(total)


def jump_norm_sq(v: WGField) -> tuple[float, float]:
    """Weighted jump pieces sum h_e^-3 ||[[v_b]]||^2 and sum h_e^-1 ||[[v_g]]||^2."""
    space = v.space
    v2 = v.to_two_sided()
    sides = space.side_traces(v2.coeffs)
    nb = space.n_edge_fn
    jb = jg = 0.0
    for e in space.interior_edges:
        L, R = space.edge_sides[e]
        d = sides[L] - sides[R]
        he = space.mesh.edges[e].length
        jb += he**-3 * float(d[:nb] @ d[:nb])
        jg += he**-1 * float(d[nb:] @ d[nb:])
    return jb, jg


def wh0_norm(v: WGField) -> float:
    """||v||_{W_h^0}: energy norm plus weighted interior trace jumps."""
    v2 = v.to_two_sided()
    jb, jg = jump_norm_sq(v2)
    return math.sqrt(max(v2.space.a_s(v2, v2), 0.0) + jb + jg)


# -- consistency functional ---------------------------------------------------

def residual_ell(ms: ManufacturedSolution, v: WGField, quad_order: int | None = None,
                 Qhu: WGField | None = None) -> float:
    """The consistency functional l_u(v) for the exact solution u:

        sum_T sum_ij < d_ij u - Q(d_ij u), (d_i v_0 - v_gi) n_j >_dT
      - sum_T sum_ij < d_j(d_ij u - Q(d_ij u)) n_i, v_0 - v_b >_dT
      + s(Q_h u, v)

    with Q the cellwise L2 projection onto P_{k-2}.
    """
    space = v.space
    mesh, k = space.mesh, space.k
    nr, nb = dim_p(k - 2), space.n_edge_fn
    order = quad_order or 2 * k + 4
    Qhu = Qhu or project_Qh(ms.u, ms.grad, space, quad_order)
    Qhu_layout = Qhu if v.layout == "shared" else Qhu.to_two_sided()
    total = 0.0
    for c, cell in enumerate(mesh.cells):
        basis = space.cell_basis(c)
        vloc = v.local(c)
        lay = space.operators[c].layout
        v0 = vloc[lay.v0]
        # projected Hessian entries, coefficients in the leading nr basis functions
        proj = np.empty((2, 2, nr))
        for i in range(2):
            for j in range(i, 2):
                proj[i, j] = project_cell(lambda x, y: ms.hess(x, y)[:, i, j], mesh, c, k - 2,
                                          quad_order=order, basis=basis)
                proj[j, i] = proj[i, j]
        for loc, e in enumerate(cell.edge_ids):
            n = mesh.outward_normal(c, loc)
            quad = edge_quadrature(mesh, e, order)
            x, y = quad.points[:, 0], quad.points[:, 1]
            chi = edge_basis(mesh, e, k - 2).eval(quad.params)
            psi, dpsi = basis.eval(quad.points, order=1)
            v0_e = v0 @ psi
            dv0 = np.stack([v0 @ dpsi[0], v0 @ dpsi[1]])
            vb = vloc[lay.vb(loc)] @ chi
            vg = np.stack([vloc[lay.vg(loc, 0)] @ chi, vloc[lay.vg(loc, 1)] @ chi])
            H = ms.hess(x, y)
            term1 = np.zeros_like(x)
            for i in range(2):
                for j in range(2):
                    qH = proj[i, j] @ psi[:nr]
                    term1 += (H[:, i, j] - qH) * (dv0[i] - vg[i]) * n[j]
            # sum_ij d_j(d_ij u) n_i = grad(lap u) . n
            third = ms.grad_lap(x, y) @ n
            for i in range(2):
                for j in range(2):
                    third -= (proj[i, j] @ dpsi[j, :nr]) * n[i]
            total += quad.integrate(term1) - quad.integrate(third * (v0_e - vb))
        total += Qhu_layout.local(c) @ space.operators[c].stabilizer @ vloc
    return float(total)


# -- error reports and convergence ------------------------------------------

@dataclass
class ErrorReport:
    h: float
    energy_error: float
    xi_error_proj: float = float("nan")
    xi_error_exact: float = float("nan")
    l2_error: float = float("nan")
    jump_b: float = 0.0
    jump_g: float = 0.0
    iterations: int = 0
    residual: float = 0.0
    n_cells: int = 0
    extras: dict = field(default_factory=dict)


def error_report(ms: ManufacturedSolution, sol, quad_order: int | None = None) -> ErrorReport:
    """Errors of a :class:`~wgbih.schemes.Solution` against ``ms``."""
    space = sol.space
    Qhu = project_Qh(ms.u, ms.grad, space, quad_order)
    e_h = WGField(space, "shared", Qhu.coeffs - sol.u.coeffs)
    rep = ErrorReport(h=space.mesh.h, energy_error=energy_norm(e_h),
                      iterations=sol.report.iterations, residual=sol.report.residual,
                      n_cells=space.mesh.n_cells)
    d0 = e_h.coeffs[: space.n_cell_dofs]
    rep.l2_error = float(np.linalg.norm(d0))
    rep.jump_b, rep.jump_g = jump_norm_sq(e_h)
    if sol.multiplier is not None:
        Ql = project_multiplier(ms, space, quad_order)
        rep.xi_error_proj = xi_norm(Multiplier(space, Ql.coeffs - sol.multiplier.coeffs))
        rep.xi_error_exact = xi_error_exact(ms, sol.multiplier)
    return rep


def observed_rates(hs: Sequence[float], errors: Sequence[float]) -> list[float]:
    """log(E_i / E_{i+1}) / log(h_i / h_{i+1}); NaN where undefined."""
    out = [float("nan")]
    for i in range(1, len(hs)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 > 0 and e1 > 0 and hs[i - 1] != hs[i]:
            out.append(math.log(e0 / e1) / math.log(hs[i - 1] / hs[i]))
        else:
            out.append(float("nan"))
    return out


@dataclass
class ConvergenceTable:
    reports: list[ErrorReport]
    rate_energy: list[float]
    rate_xi: list[float]
    rate_xi_proj: list[float]


def convergence_study(scheme: str, ms: ManufacturedSolution, k: int, meshes: Sequence[Mesh],
                      tol: float = 1e-10, quad_order: int | None = None) -> ConvergenceTable:
    """Solve on every mesh and tabulate errors and observed rates."""
    from .schemes import solve_hwg_dense, solve_wg
    from .schur import recover_multiplier, solve_schur

    if len(meshes) < 2:
        raise ValueError("a convergence study needs at least two meshes")
    reports = []
    for mesh in meshes:
        space = WGSpace(mesh, k)
        bc = ms.boundary_data()
        if scheme == "wg":
            sol = solve_wg(space, f=ms.f, bc=bc, tol=tol, quad_order=quad_order)
            sol.multiplier = recover_multiplier(sol.u)
        elif scheme == "schur":
            sol = solve_schur(space, f=ms.f, bc=bc, tol=tol, quad_order=quad_order)
        elif scheme == "hwg-dense":
            sol = solve_hwg_dense(space, f=ms.f, bc=bc, quad_order=quad_order)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        reports.append(error_report(ms, sol, quad_order))
    hs = [r.h for r in reports]
    return ConvergenceTable(
        reports,
        observed_rates(hs, [r.energy_error for r in reports]),
        observed_rates(hs, [r.xi_error_exact for r in reports]),
        observed_rates(hs, [r.xi_error_proj for r in reports]),
    )
