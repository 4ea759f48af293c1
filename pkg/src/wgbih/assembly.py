"""Global layouts, jump/similarity, boundary lifts and system assembly.

Two global layouts are used for weak functions:

* ``shared``    -- V_h: cell blocks followed by one trace block per edge;
* ``two-sided`` -- W_h: cell blocks followed by one trace block per
  (cell, local edge) incidence, in cell order.

Multipliers (Xi_h) keep one block per *interior* edge holding the value seen
from the left cell; the right-side value is its negation and boundary values
are zero, so the zero-similarity constraint holds by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .basis import cell_basis, cell_quadrature, dim_p
from .mesh import Mesh
from .weakops import LocalElementOperators, WGField, cell_order, local_operators, project_edge


class WGSpace:
    """Degree-k weak Galerkin space on a mesh, with cached local operators."""

    def __init__(self, mesh: Mesh, k: int = 2):
        if int(k) != k or k < 2:
            raise ValueError(f"polynomial degree k must satisfy k >= 2, got {k}")
        self.mesh = mesh
        self.k = int(k)
        self.n_cell_fn = dim_p(self.k)
        self.n_edge_fn = self.k - 1
        self.n_trace = 3 * (self.k - 1)

        self.n_cell_dofs = mesh.n_cells * self.n_cell_fn
        self.n_shared = self.n_cell_dofs + mesh.n_edges * self.n_trace

        # incidence numbering: cell-major, local-edge minor
        self.incidence_start = np.zeros(mesh.n_cells + 1, dtype=int)
        self.incidence_start[1:] = np.cumsum([c.n_edges for c in mesh.cells])
        self.n_incidences = int(self.incidence_start[-1])
        self.n_two_sided = self.n_cell_dofs + self.n_incidences * self.n_trace
        self.incidence_cell = np.repeat(np.arange(mesh.n_cells), np.diff(self.incidence_start))
        self.incidence_edge = np.array([e for c in mesh.cells for e in c.edge_ids], dtype=int)
        self.incidence_sign = np.array([s for c in mesh.cells for s in c.edge_signs], dtype=int)

        # left/right incidence of each edge (-1 for the missing right side)
        self.edge_sides = -np.ones((mesh.n_edges, 2), dtype=int)
        for inc, (e, s) in enumerate(zip(self.incidence_edge, self.incidence_sign)):
            self.edge_sides[e, 0 if s > 0 else 1] = inc

        self.interior_edges = np.array(mesh.interior_edge_ids, dtype=int)
        self.boundary_edges = np.array(mesh.boundary_edge_ids, dtype=int)
        self.interior_position = -np.ones(mesh.n_edges, dtype=int)
        self.interior_position[self.interior_edges] = np.arange(len(self.interior_edges))
        self.n_multiplier = len(self.interior_edges) * self.n_trace

        self._local_shared = [self._build_local_index(c, "shared") for c in range(mesh.n_cells)]
        self._local_two_sided = [self._build_local_index(c, "two-sided") for c in range(mesh.n_cells)]
        self._bases: dict[int, object] = {}
        self._ops: list[LocalElementOperators] | None = None

    # -- index maps -------------------------------------------------------
    def cell_dofs(self, c: int) -> np.ndarray:
        return np.arange(c * self.n_cell_fn, (c + 1) * self.n_cell_fn)

    def edge_dofs(self, e: int) -> np.ndarray:
        start = self.n_cell_dofs + e * self.n_trace
        return np.arange(start, start + self.n_trace)

    def incidence_dofs(self, inc: int) -> np.ndarray:
        start = self.n_cell_dofs + inc * self.n_trace
        return np.arange(start, start + self.n_trace)

    def _build_local_index(self, c: int, layout: str) -> np.ndarray:
        parts = [self.cell_dofs(c)]
        for j, e in enumerate(self.mesh.cells[c].edge_ids):
            parts.append(self.edge_dofs(e) if layout == "shared"
                         else self.incidence_dofs(self.incidence_start[c] + j))
        return np.concatenate(parts)

    def local_index(self, c: int, layout: str = "shared") -> np.ndarray:
        return self._local_shared[c] if layout == "shared" else self._local_two_sided[c]

    def shared_boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_shared, dtype=bool)
        for e in self.boundary_edges:
            mask[self.edge_dofs(e)] = True
        return mask

    def two_sided_boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_two_sided, dtype=bool)
        for inc in np.flatnonzero(self.edge_sides[self.incidence_edge, 1] < 0):
            mask[self.incidence_dofs(inc)] = True
        return mask

    def shared_to_two_sided(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_two_sided)
        out[: self.n_cell_dofs] = x[: self.n_cell_dofs]
        tr = x[self.n_cell_dofs:].reshape(self.mesh.n_edges, self.n_trace)
        out[self.n_cell_dofs:] = tr[self.incidence_edge].ravel()
        return out

    def two_sided_to_shared(self, x: np.ndarray) -> np.ndarray:
        """Collapse to V_h layout by taking the left copy of every edge."""
        out = np.empty(self.n_shared)
        out[: self.n_cell_dofs] = x[: self.n_cell_dofs]
        tr = x[self.n_cell_dofs:].reshape(self.n_incidences, self.n_trace)
        out[self.n_cell_dofs:] = tr[self.edge_sides[:, 0]].ravel()
        return out

    def side_traces(self, x_two_sided: np.ndarray) -> np.ndarray:
        """Trace part of a two-sided vector as an ``(n_incidences, n_trace)`` view."""
        return x_two_sided[self.n_cell_dofs:].reshape(self.n_incidences, self.n_trace)

    # -- local data ---------------------------------------------------------
    def cell_basis(self, c: int):
        if c not in self._bases:
            self._bases[c] = cell_basis(self.mesh, c, self.k)
        return self._bases[c]

    @property
    def operators(self) -> list[LocalElementOperators]:
        if self._ops is None:
            self._ops = [local_operators(self.mesh, c, self.k, self.cell_basis(c))
                         for c in range(self.mesh.n_cells)]
        return self._ops

    def load_vector(self, f: Callable, quad_order: int | None = None) -> np.ndarray:
        """(f, psi)_T for every cell basis function, in shared cell-block order."""
        out = np.zeros(self.n_cell_dofs)
        for c in range(self.mesh.n_cells):
            quad = cell_quadrature(self.mesh, c, quad_order or cell_order(self.k))
            psi = self.cell_basis(c).eval(quad.points)
            out[self.cell_dofs(c)] = psi @ (quad.weights * f(quad.points[:, 0], quad.points[:, 1]))
        return out

    def a_s(self, w: WGField, v: WGField) -> float:
        """a_s(w, v) = sum_T a_{s,T}; both fields in the same layout."""
        if w.layout != v.layout:
            raise ValueError("a_s needs both fields in the same layout")
        total = 0.0
        for c, ops in enumerate(self.operators):
            total += w.local(c) @ ops.combined @ v.local(c)
        return float(total)


@dataclass
class Multiplier:
    """lambda in Xi_h: left-side coefficients on each interior edge."""
    space: WGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_multiplier,):
            raise ValueError(f"multiplier needs {self.space.n_multiplier} coefficients")

    def on_edge(self, e: int) -> np.ndarray:
        p = self.space.interior_position[e]
        if p < 0:
            return np.zeros(self.space.n_trace)
        return self.coeffs[p * self.space.n_trace:(p + 1) * self.space.n_trace]

    def to_sides(self) -> np.ndarray:
        """Per-incidence values ``(n_incidences, n_trace)``: +lambda_L on the left
        copy, -lambda_L on the right copy, zero on the boundary."""
        sp_ = self.space
        out = np.zeros((sp_.n_incidences, sp_.n_trace))
        lam = self.coeffs.reshape(-1, sp_.n_trace)
        for p, e in enumerate(sp_.interior_edges):
            L, R = sp_.edge_sides[e]
            out[L] = lam[p]
            out[R] = -lam[p]
        return out


@dataclass
class TraceField:
    """Element of B_h: one {w_b, w_g} block per edge (interior and boundary)."""
    space: WGSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.mesh.n_edges * self.space.n_trace,):
            raise ValueError("trace field length does not match the edge count")

    @property
    def blocks(self) -> np.ndarray:
        return self.coeffs.reshape(self.space.mesh.n_edges, self.space.n_trace)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros((self.space.mesh.n_edges, self.space.n_trace), dtype=bool)
        mask[self.space.boundary_edges] = True
        return mask.ravel()


@dataclass
class BoundaryData:
    """Dirichlet data u = xi and du/dn = nu on the boundary.

    ``xi(x, y)``, ``nu(x, y, n)`` and ``dxi_dtau(x, y, tau)`` are evaluated at
    edge quadrature points with the (constant) outward normal / tangent of the
    boundary edge.
    """
    xi: Callable
    nu: Callable
    dxi_dtau: Callable

    @classmethod
    def from_solution(cls, u: Callable, grad_u: Callable) -> "BoundaryData":
        return cls(
            xi=u,
            nu=lambda x, y, n: grad_u(x, y) @ n,
            dxi_dtau=lambda x, y, t: grad_u(x, y) @ t,
        )

    @classmethod
    def homogeneous(cls) -> "BoundaryData":
        zero = lambda x, y, *_: np.zeros_like(x)  # noqa: E731
        return cls(zero, zero, zero)


@dataclass
class LinearSystem:
    """Reduced system on the free dofs plus what is needed to rebuild fields."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray          # indices of unknowns in the full layout vector
    lift: np.ndarray          # full layout vector carrying the boundary values
    layout: str


def jump(v: WGField, e: int) -> np.ndarray:
    """L copy minus R copy of {v_b, v_g} on edge e (the one-sided value on the boundary)."""
    v = v.to_two_sided()
    sides = v.space.side_traces(v.coeffs)
    L, R = v.space.edge_sides[e]
    return sides[L] - sides[R] if R >= 0 else sides[L].copy()


def similarity(side_values: np.ndarray, space: WGSpace, e: int) -> np.ndarray:
    """L value plus R value of per-incidence data (the one-sided value on the boundary)."""
    L, R = space.edge_sides[e]
    return side_values[L] + side_values[R] if R >= 0 else side_values[L].copy()


def b_form(v: WGField, lam: Multiplier) -> float:
    """b(v, lambda) = sum over interior edges of <[[v]]_e, lambda_L>_e."""
    space = lam.space
    return float(sum(jump(v, e) @ lam.on_edge(e) for e in space.interior_edges))


def b_form_elementwise(v: WGField, lam: Multiplier) -> float:
    """b(v, lambda) = sum_T <v, lambda>_dT with the signed per-side multiplier."""
    v = v.to_two_sided()
    return float(np.sum(v.space.side_traces(v.coeffs) * lam.to_sides()))


def multiplier_matrix(space: WGSpace) -> sp.csr_matrix:
    """B with (B x) . lambda = b(x, lambda) for two-sided coefficient vectors x."""
    rows, cols, vals = [], [], []
    nt = space.n_trace
    for p, e in enumerate(space.interior_edges):
        L, R = space.edge_sides[e]
        r = np.arange(p * nt, (p + 1) * nt)
        rows += [r, r]
        cols += [space.incidence_dofs(L), space.incidence_dofs(R)]
        vals += [np.ones(nt), -np.ones(nt)]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.n_multiplier, space.n_two_sided))


def apply_boundary_conditions(bc: BoundaryData, space: WGSpace,
                              quad_order: int | None = None) -> TraceField:
    """Boundary lift G: G_b = Q_b xi, G_g = (Q_b nu) n + (Q_b dxi/dtau) tau
    on boundary edges, zero on interior edges."""
    mesh, k = space.mesh, space.k
    G = np.zeros((mesh.n_edges, space.n_trace))
    nb = space.n_edge_fn
    for e in space.boundary_edges:
        edge = mesh.edges[e]
        n, t = edge.normal, edge.tangent
        gb = project_edge(bc.xi, mesh, e, k - 2, quad_order)
        gn = project_edge(lambda x, y: bc.nu(x, y, n), mesh, e, k - 2, quad_order)
        gt = project_edge(lambda x, y: bc.dxi_dtau(x, y, t), mesh, e, k - 2, quad_order)
        G[e, :nb] = gb
        G[e, nb:2 * nb] = gn * n[0] + gt * t[0]
        G[e, 2 * nb:] = gn * n[1] + gt * t[1]
    return TraceField(space, G.ravel())


def global_matrix(space: WGSpace, layout: str = "shared") -> sp.csr_matrix:
    """Sum of the local a_{s,T} matrices scattered into the given layout."""
    rows, cols, vals = [], [], []
    for c, ops in enumerate(space.operators):
        idx = space.local_index(c, layout)
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(ops.combined.ravel())
    n = space.n_shared if layout == "shared" else space.n_two_sided
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def _full_lift(space: WGSpace, G: TraceField, layout: str) -> np.ndarray:
    shared = np.zeros(space.n_shared)
    shared[space.n_cell_dofs:] = G.coeffs
    return shared if layout == "shared" else space.shared_to_two_sided(shared)


def assemble_wg(space: WGSpace, f: Callable, bc: BoundaryData,
                quad_order: int | None = None) -> LinearSystem:
    """SPD system a_s(u, v) = (f, v_0) for v in V_h^0, boundary dofs lifted out."""
    A = global_matrix(space, "shared")
    F = np.zeros(space.n_shared)
    F[: space.n_cell_dofs] = space.load_vector(f, quad_order)
    G = apply_boundary_conditions(bc, space, quad_order)
    lift = _full_lift(space, G, "shared")
    free = np.flatnonzero(~space.shared_boundary_mask())
    rhs = (F - A @ lift)[free]
    return LinearSystem(A[free][:, free].tocsr(), rhs, free, lift, "shared")


def assemble_hwg(space: WGSpace, f: Callable, bc: BoundaryData,
                 quad_order: int | None = None) -> LinearSystem:
    """Symmetric saddle system [[A_s, B^T], [B, 0]] on (W_h^0 dofs, Xi_h dofs).

    The unknown vector is ``[u_free, lambda]``; ``free`` indexes only the
    W_h part.  Rows encode a_s(u, v) + b(v, lambda) = (f, v_0) and
    b(u, rho) = 0.
    """
    A = global_matrix(space, "two-sided")
    B = multiplier_matrix(space)
    F = np.zeros(space.n_two_sided)
    F[: space.n_cell_dofs] = space.load_vector(f, quad_order)
    G = apply_boundary_conditions(bc, space, quad_order)
    lift = _full_lift(space, G, "two-sided")
    free = np.flatnonzero(~space.two_sided_boundary_mask())
    Aff = A[free][:, free]
    Bf = B[:, free]
    K = sp.bmat([[Aff, Bf.T], [Bf, None]], format="csr")
    rhs = np.concatenate([(F - A @ lift)[free], -(B @ lift)])
    return LinearSystem(K, rhs, free, lift, "two-sided")
