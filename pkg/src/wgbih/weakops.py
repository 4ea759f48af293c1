"""L2 projections, the discrete weak Hessian and the local stiffness/stabilizer.

Local degrees of freedom on a cell T with ``ne`` edges are ordered as

    [ v_0 (N_k) | edge 0: v_b, v_gx, v_gy | edge 1: ... ]

with ``k - 1`` coefficients per trace block, all in orthonormal bases, so every
local mass matrix is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import CellBasis, cell_basis, cell_quadrature, dim_p, edge_basis, edge_quadrature
from .mesh import Mesh

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def cell_order(k: int) -> int:
    return 2 * k + 2


def edge_order(k: int) -> int:
    return 2 * k


@dataclass(frozen=True)
class LocalDofLayout:
    cell_id: int
    k: int
    n_edges: int

    @property
    def n_cell(self) -> int:
        return dim_p(self.k)

    @property
    def n_edge_fn(self) -> int:
        return self.k - 1

    @property
    def n_trace(self) -> int:
        return 3 * (self.k - 1)

    @property
    def size(self) -> int:
        return self.n_cell + self.n_edges * self.n_trace

    @property
    def v0(self) -> slice:
        return slice(0, self.n_cell)

    def edge_block(self, j: int) -> slice:
        start = self.n_cell + j * self.n_trace
        return slice(start, start + self.n_trace)

    def vb(self, j: int) -> slice:
        start = self.n_cell + j * self.n_trace
        return slice(start, start + self.n_edge_fn)

    def vg(self, j: int, comp: int) -> slice:
        start = self.n_cell + j * self.n_trace + (1 + comp) * self.n_edge_fn
        return slice(start, start + self.n_edge_fn)

    @property
    def traces(self) -> slice:
        return slice(self.n_cell, self.size)


@dataclass
class WGField:
    """Coefficients of a discrete weak function on a :class:`~wgbih.assembly.WGSpace`.

    ``layout`` is ``"shared"`` (one trace copy per edge, the space V_h) or
    ``"two-sided"`` (one trace copy per cell/edge incidence, the space W_h).
    """
    space: object
    layout: str
    coeffs: np.ndarray

    def __post_init__(self):
        if self.layout not in ("shared", "two-sided"):
            raise ValueError(f"unknown layout {self.layout!r}")
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = self.space.n_shared if self.layout == "shared" else self.space.n_two_sided
        if self.coeffs.shape != (expected,):
            raise ValueError(f"{self.layout} field needs {expected} coefficients, got {self.coeffs.shape}")

    def local(self, cell_id: int) -> np.ndarray:
        idx = self.space.local_index(cell_id, self.layout)
        return self.coeffs[idx]

    def to_two_sided(self) -> "WGField":
        if self.layout == "two-sided":
            return self
        return WGField(self.space, "two-sided", self.space.shared_to_two_sided(self.coeffs))


def project_cell(fn: ScalarFn, mesh: Mesh, cell_id: int, degree: int,
                 quad_order: int | None = None, basis: CellBasis | None = None) -> np.ndarray:
    """Coefficients of the L2 projection of ``fn(x, y)`` onto P_degree(T)."""
    basis = basis or cell_basis(mesh, cell_id, degree)
    quad = cell_quadrature(mesh, cell_id, quad_order or 2 * degree + 8)
    vals = np.asarray(fn(quad.points[:, 0], quad.points[:, 1]), dtype=float)
    phi = basis.eval(quad.points)[: dim_p(degree)]
    return phi @ (quad.weights * vals)


def project_edge(fn: ScalarFn, mesh: Mesh, edge_id: int, degree: int,
                 quad_order: int | None = None) -> np.ndarray:
    """Coefficients of the L2(e) projection onto P_degree(e).

    ``fn`` may return shape ``(m,)`` or ``(m, c)`` for c-vector data, in which
    case the result has shape ``(c, degree + 1)``.
    """
    quad = edge_quadrature(mesh, edge_id, quad_order or 2 * degree + 8)
    chi = edge_basis(mesh, edge_id, degree).eval(quad.params)
    vals = np.asarray(fn(quad.points[:, 0], quad.points[:, 1]), dtype=float)
    return (chi * quad.weights) @ vals if vals.ndim == 1 else ((chi * quad.weights) @ vals).T


def project_Qh(u: ScalarFn, grad_u: Callable, space, quad_order: int | None = None) -> WGField:
    """Q_h u = {Q_0 u, Q_b u, Q_b grad u} in the shared-trace layout.

    ``grad_u(x, y)`` returns an array of shape ``(m, 2)``.
    """
    mesh, k = space.mesh, space.k
    out = np.zeros(space.n_shared)
    for c in range(mesh.n_cells):
        out[space.cell_dofs(c)] = project_cell(u, mesh, c, k, quad_order, basis=space.cell_basis(c))
    for e in range(mesh.n_edges):
        out[space.edge_dofs(e)] = _project_trace(u, grad_u, mesh, e, k, quad_order)
    return WGField(space, "shared", out)


def _project_trace(u, grad_u, mesh, e, k, quad_order=None) -> np.ndarray:
    vb = project_edge(u, mesh, e, k - 2, quad_order)
    vg = project_edge(grad_u, mesh, e, k - 2, quad_order)
    return np.concatenate([vb, vg[0], vg[1]])


@dataclass
class LocalElementOperators:
    """Per-cell matrices acting on local dofs (see module docstring)."""
    layout: LocalDofLayout
    weak_hessian: np.ndarray     # (2, 2, N_{k-2}, size)
    stiffness: np.ndarray        # A_T
    stabilizer: np.ndarray       # S_T
    # per local edge: (P, Gx, Gy), each (k-1, N_k): Q_b of v_0, d_x v_0, d_y v_0
    trace_maps: list = field(default_factory=list)

    @property
    def combined(self) -> np.ndarray:
        return self.stiffness + self.stabilizer


def _edge_data(mesh: Mesh, cell_id: int, k: int, order: int | None = None):
    """Edge quadrature, outward normal and orthonormal edge basis values for
    every local edge of a cell."""
    cell = mesh.cells[cell_id]
    out = []
    for j, e in enumerate(cell.edge_ids):
        quad = edge_quadrature(mesh, e, order or edge_order(k))
        chi = edge_basis(mesh, e, k - 2).eval(quad.params)
        out.append((quad, mesh.outward_normal(cell_id, j), chi))
    return out


def weak_hessian_maps(mesh: Mesh, cell_id: int, k: int,
                      basis: CellBasis | None = None) -> np.ndarray:
    """The four maps W_ij from local dofs to P_{k-2}(T) coefficients.

    Row m of W_ij is the weak-Hessian functional tested against the
    orthonormal function phi_m:

        (v_0, d_ji phi)_T - <v_b n_i, d_j phi>_dT + <v_gi, phi n_j>_dT

    using the outward normal of the cell on each edge.
    """
    basis = basis or cell_basis(mesh, cell_id, k)
    lay = LocalDofLayout(cell_id, k, mesh.cells[cell_id].n_edges)
    nr = dim_p(k - 2)
    W = np.zeros((2, 2, nr, lay.size))

    quad = cell_quadrature(mesh, cell_id, cell_order(k))
    psi, _, hess = basis.eval(quad.points, order=2)
    for i in range(2):
        for j in range(2):
            W[i, j, :, lay.v0] = (hess[j, i, :nr] * quad.weights) @ psi.T

    for loc, (eq, n, chi) in enumerate(_edge_data(mesh, cell_id, k)):
        phi, dphi = basis.eval(eq.points, order=1)
        phi, dphi = phi[:nr], dphi[:, :nr]
        for i in range(2):
            for j in range(2):
                W[i, j, :, lay.vb(loc)] -= n[i] * (dphi[j] * eq.weights) @ chi.T
                W[i, j, :, lay.vg(loc, i)] += n[j] * (phi * eq.weights) @ chi.T
    return W


def weak_hessian_maps_by_parts(mesh: Mesh, cell_id: int, k: int) -> np.ndarray:
    """Same maps as :func:`weak_hessian_maps`, from the integrated-by-parts form

        (d_ij v_0, phi)_T + <(v_0 - v_b) n_i, d_j phi>_dT
                          - <(d_i v_0 - v_gi) n_j, phi>_dT.

    Independent code path kept as a cross-check.
    """
    basis = cell_basis(mesh, cell_id, k)
    cell = mesh.cells[cell_id]
    nk, nr, nb = dim_p(k), dim_p(k - 2), k - 1
    size = nk + cell.n_edges * 3 * nb
    W = np.zeros((2, 2, nr, size))

    quad = cell_quadrature(mesh, cell_id, 2 * k)
    psi_all, _, hess = basis.eval(quad.points, order=2)
    phi_in = psi_all[:nr]
    for i in range(2):
        for j in range(2):
            W[i, j, :, :nk] = np.einsum("mq,aq,q->ma", phi_in, hess[i, j], quad.weights)

    for loc, e in enumerate(cell.edge_ids):
        n = cell.edge_signs[loc] * mesh.edges[e].normal
        eq = edge_quadrature(mesh, e, 2 * k + 2)
        chi = edge_basis(mesh, e, k - 2).eval(eq.params)
        psi, dpsi = basis.eval(eq.points, order=1)
        off = nk + 3 * nb * loc
        for i in range(2):
            for j in range(2):
                # trial in the test basis: phi_m = first nr orthonormal functions
                W[i, j, :, :nk] += n[i] * np.einsum("mq,aq,q->ma", dpsi[j, :nr], psi, eq.weights)
                W[i, j, :, :nk] -= n[j] * np.einsum("mq,aq,q->ma", psi[:nr], dpsi[i], eq.weights)
                W[i, j, :, off:off + nb] -= n[i] * np.einsum("mq,lq,q->ml", dpsi[j, :nr], chi, eq.weights)
                g = off + nb * (1 + i)
                W[i, j, :, g:g + nb] += n[j] * np.einsum("mq,lq,q->ml", psi[:nr], chi, eq.weights)
    return W


def trace_projection_maps(mesh: Mesh, cell_id: int, k: int,
                          basis: CellBasis | None = None) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """For each local edge the matrices taking v_0 coefficients to the edge
    coefficients of Q_b v_0, Q_b d_x v_0 and Q_b d_y v_0."""
    basis = basis or cell_basis(mesh, cell_id, k)
    maps = []
    for eq, _, chi in _edge_data(mesh, cell_id, k):
        psi, dpsi = basis.eval(eq.points, order=1)
        cw = chi * eq.weights
        maps.append((cw @ psi.T, cw @ dpsi[0].T, cw @ dpsi[1].T))
    return maps


def _residual_operators(lay: LocalDofLayout, trace_maps):
    """Row blocks R_b, R_g with R_b v = Q_b v_0 - v_b and R_g v = Q_b grad v_0 - v_g."""
    nb = lay.n_edge_fn
    Rb = np.zeros((lay.n_edges * nb, lay.size))
    Rg = np.zeros((lay.n_edges * 2 * nb, lay.size))
    for j, (P, Gx, Gy) in enumerate(trace_maps):
        rows = slice(j * nb, (j + 1) * nb)
        Rb[rows, lay.v0] = P
        Rb[rows, lay.vb(j)] -= np.eye(nb)
        for comp, G in enumerate((Gx, Gy)):
            rows = slice((2 * j + comp) * nb, (2 * j + comp + 1) * nb)
            Rg[rows, lay.v0] = G
            Rg[rows, lay.vg(j, comp)] -= np.eye(nb)
    return Rb, Rg


def local_stabilizer(mesh: Mesh, cell_id: int, k: int, trace_maps=None) -> np.ndarray:
    """Matrix of s_T: h_T^-1 <Q_b grad w_0 - w_g, ...> + h_T^-3 <Q_b w_0 - w_b, ...>."""
    lay = LocalDofLayout(cell_id, k, mesh.cells[cell_id].n_edges)
    trace_maps = trace_maps or trace_projection_maps(mesh, cell_id, k)
    hT = mesh.cells[cell_id].diameter
    Rb, Rg = _residual_operators(lay, trace_maps)
    return hT**-3 * Rb.T @ Rb + hT**-1 * Rg.T @ Rg


def local_operators(mesh: Mesh, cell_id: int, k: int,
                    basis: CellBasis | None = None) -> LocalElementOperators:
    if k < 2:
        raise ValueError(f"polynomial degree k must satisfy k >= 2, got {k}")
    basis = basis or cell_basis(mesh, cell_id, k)
    lay = LocalDofLayout(cell_id, k, mesh.cells[cell_id].n_edges)
    W = weak_hessian_maps(mesh, cell_id, k, basis)
    A = np.einsum("ijma,ijmb->ab", W, W)
    maps = trace_projection_maps(mesh, cell_id, k, basis)
    S = local_stabilizer(mesh, cell_id, k, maps)
    # exact symmetrisation against round-off
    A = 0.5 * (A + A.T)
    S = 0.5 * (S + S.T)
    return LocalElementOperators(lay, W, A, S, maps)
