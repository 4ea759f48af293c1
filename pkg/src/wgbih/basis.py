"""Quadrature rules and L2-orthonormal polynomial bases on cells and edges."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.special import roots_jacobi

from .mesh import Mesh

MAX_EXACTNESS = 40


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray          # (m, 2) physical points
    weights: np.ndarray         # (m,)
    degree: int
    params: np.ndarray | None = None  # arc-length parameters for edge rules

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def dim_p(r: int) -> int:
    """Dimension of the bivariate polynomials of total degree <= r."""
    return (r + 1) * (r + 2) // 2 if r >= 0 else 0


def monomial_exponents(r: int) -> list[tuple[int, int]]:
    """Graded lexicographic order: 1, x, y, x^2, xy, y^2, ..."""
    return [(t - b, b) for t in range(r + 1) for b in range(t + 1)]


@lru_cache(maxsize=None)
def _gauss_legendre01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss-Jacobi x Gauss-Legendre rule on the triangle
    (0,0), (1,0), (0,1); exact for total degree ``degree``.  Weights sum to 1/2.
    """
    if degree < 0:
        raise ValueError("quadrature exactness must be non-negative")
    if degree > MAX_EXACTNESS:
        raise ValueError(f"exactness {degree} exceeds the supported maximum {MAX_EXACTNESS}")
    npts = max(1, (degree + 2) // 2)
    xj, wj = roots_jacobi(npts, 1.0, 0.0)
    u = 0.5 * (xj + 1.0)
    wu = 0.25 * wj  # int_0^1 g(u) (1-u) du
    v, wv = _gauss_legendre01(npts)
    a = np.repeat(u, npts)
    b = np.outer(1.0 - u, v).ravel()
    w = np.outer(wu, wv).ravel()
    return np.column_stack([a, b]), w


def triangle_rule(p0, p1, p2, degree: int) -> tuple[np.ndarray, np.ndarray]:
    ref, w = reference_triangle_rule(degree)
    p0, p1, p2 = map(np.asarray, (p0, p1, p2))
    jac = abs((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
    pts = p0 + ref[:, :1] * (p1 - p0) + ref[:, 1:] * (p2 - p0)
    return pts, w * jac


def cell_quadrature(mesh: Mesh, cell_id: int, degree: int) -> QuadRule:
    """Exact for bivariate polynomials of total degree ``degree`` on the cell.

    Triangles use the rule directly; other polygons are fanned from the
    centroid.
    """
    xy = mesh.cell_vertices(cell_id)
    if len(xy) == 3:
        pts, w = triangle_rule(xy[0], xy[1], xy[2], degree)
    else:
        c = mesh.cells[cell_id].centroid
        parts = [triangle_rule(c, xy[i], xy[(i + 1) % len(xy)], degree) for i in range(len(xy))]
        pts = np.concatenate([p for p, _ in parts])
        w = np.concatenate([w for _, w in parts])
    return QuadRule(pts, w, degree)


def edge_quadrature(mesh: Mesh, edge_id: int, degree: int) -> QuadRule:
    """Gauss-Legendre with ceil((degree+1)/2) points along the edge."""
    if degree < 0:
        raise ValueError("quadrature exactness must be non-negative")
    e = mesh.edges[edge_id]
    s01, w01 = _gauss_legendre01(max(1, (degree + 2) // 2))
    s = s01 * e.length
    return QuadRule(e.point(s), w01 * e.length, degree, params=s)


def _monomials(exps, X, Y, hinv, order):
    """Scaled monomials and their derivatives (w.r.t. physical x, y)."""
    n, m = len(exps), X.size
    val = np.empty((n, m))
    grad = np.zeros((2, n, m)) if order >= 1 else None
    hess = np.zeros((2, 2, n, m)) if order >= 2 else None

    def pw(base, p):
        return base**p if p >= 0 else np.zeros_like(base)

    for i, (a, b) in enumerate(exps):
        xa, yb = pw(X, a), pw(Y, b)
        val[i] = xa * yb
        if order >= 1:
            grad[0, i] = a * pw(X, a - 1) * yb * hinv
            grad[1, i] = b * xa * pw(Y, b - 1) * hinv
        if order >= 2:
            hess[0, 0, i] = a * (a - 1) * pw(X, a - 2) * yb * hinv**2
            hess[1, 1, i] = b * (b - 1) * xa * pw(Y, b - 2) * hinv**2
            hess[0, 1, i] = hess[1, 0, i] = a * b * pw(X, a - 1) * pw(Y, b - 1) * hinv**2
    return val, grad, hess


@dataclass(frozen=True)
class CellBasis:
    """Orthonormal basis of P_r(T) built from centred, scaled monomials.

    ``coeffs[i, j]`` is the weight of monomial j in basis function i; it is
    lower triangular, so the leading ``dim_p(s)`` functions span P_s(T) for
    every s <= r.
    """
    cell_id: int
    degree: int
    center: np.ndarray
    scale: float
    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return dim_p(self.degree)

    def eval(self, points, order: int = 0):
        """Values ``(m, N)`` (basis functions by points); with ``order`` 1 or 2 also gradients ``(2, m, N)``
        and Hessians ``(2, 2, m, N)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        X = (pts[:, 0] - self.center[0]) / self.scale
        Y = (pts[:, 1] - self.center[1]) / self.scale
        val, grad, hess = _monomials(monomial_exponents(self.degree), X, Y, 1.0 / self.scale, order)
        C = self.coeffs
        out = [C @ val]
        if order >= 1:
            out.append(np.einsum("ij,djm->dim", C, grad))
        if order >= 2:
            out.append(np.einsum("ij,abjm->abim", C, hess))
        return out[0] if order == 0 else tuple(out)


def cell_basis(mesh: Mesh, cell_id: int, degree: int) -> CellBasis:
    if degree < 0:
        raise ValueError("basis degree must be non-negative")
    cell = mesh.cells[cell_id]
    quad = cell_quadrature(mesh, cell_id, 2 * degree)
    exps = monomial_exponents(degree)
    X = (quad.points[:, 0] - cell.centroid[0]) / cell.diameter
    Y = (quad.points[:, 1] - cell.centroid[1]) / cell.diameter
    M, _, _ = _monomials(exps, X, Y, 1.0 / cell.diameter, 0)
    gram = (M * quad.weights) @ M.T
    try:
        L = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular monomial Gram matrix on cell {cell_id} (degenerate cell?)") from exc
    if np.diag(L).min() <= 1e-13 * np.diag(L).max():
        raise ValueError(f"numerically singular monomial Gram matrix on cell {cell_id}")
    coeffs = sla.solve_triangular(L, np.eye(len(exps)), lower=True)
    return CellBasis(cell_id, degree, cell.centroid.copy(), cell.diameter, coeffs)


@dataclass(frozen=True)
class EdgeBasis:
    """Orthonormal Legendre polynomials in the arc-length parameter."""
    edge_id: int
    degree: int
    length: float

    @property
    def dim(self) -> int:
        return self.degree + 1

    def eval(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = 2.0 * s / self.length - 1.0
        out = np.empty((self.degree + 1, s.size))
        for m in range(self.degree + 1):
            c = np.zeros(m + 1)
            c[m] = 1.0
            out[m] = np.polynomial.legendre.legval(t, c) * np.sqrt((2 * m + 1) / self.length)
        return out


def edge_basis(mesh: Mesh, edge_id: int, degree: int) -> EdgeBasis:
    if degree < 0:
        raise ValueError("basis degree must be non-negative")
    return EdgeBasis(edge_id, degree, mesh.edges[edge_id].length)
