"""Polygonal meshes of the unit square with full edge topology.

Orientation conventions used everywhere downstream:

* cell vertex loops are counter-clockwise;
* the *left* cell of an edge is the incident cell with the smaller index;
* the edge endpoints are stored in the order the left cell traverses them,
  so the unit tangent points from ``endpoint_ids[0]`` to ``endpoint_ids[1]``
  and the unit normal ``n`` (tangent rotated 90 degrees clockwise) points out
  of the left cell, i.e. ``tangent`` is ``n`` rotated counter-clockwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh input or a failed mesh validation."""


@dataclass(frozen=True)
class Cell:
    vertex_ids: tuple[int, ...]
    centroid: np.ndarray
    diameter: float
    area: float
    # local edge i joins vertex_ids[i] -> vertex_ids[i+1]
    edge_ids: tuple[int, ...]
    # +1 where this cell is the left cell of the edge, -1 otherwise
    edge_signs: tuple[int, ...]

    @property
    def n_edges(self) -> int:
        return len(self.vertex_ids)


@dataclass(frozen=True)
class Edge:
    endpoint_ids: tuple[int, int]
    left_cell: int
    right_cell: int | None
    length: float
    normal: np.ndarray
    tangent: np.ndarray
    start: np.ndarray

    @property
    def is_boundary(self) -> bool:
        return self.right_cell is None

    @property
    def midpoint(self) -> np.ndarray:
        return self.start + 0.5 * self.length * self.tangent

    def point(self, s) -> np.ndarray:
        """Points at arc-length parameter(s) ``s`` measured from the start."""
        s = np.asarray(s, dtype=float)
        return self.start + s[..., None] * self.tangent


def _polygon_area_centroid(xy: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, xy.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return float(area), np.array([cx, cy])


def _diameter(xy: np.ndarray) -> float:
    d = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((d**2).sum(axis=-1)).max())


class Mesh:
    """Immutable 2D polygonal partition with edge topology.

    Build with :meth:`from_cells`; the generators below and :func:`load_mesh`
    all go through it.
    """

    def __init__(self, vertices: np.ndarray, cells: list[Cell], edges: list[Edge]):
        self.vertices = vertices
        self.vertices.setflags(write=False)
        self.cells = tuple(cells)
        self.edges = tuple(edges)
        self.boundary_edge_ids = tuple(i for i, e in enumerate(edges) if e.is_boundary)
        self.interior_edge_ids = tuple(i for i, e in enumerate(edges) if not e.is_boundary)

    @classmethod
    def from_cells(cls, vertices, cell_vertex_ids: Iterable[Sequence[int]]) -> "Mesh":
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        loops = [tuple(int(v) for v in c) for c in cell_vertex_ids]
        if not loops:
            raise MeshError("mesh has no cells")

        edge_index: dict[tuple[int, int], int] = {}
        endpoints: list[tuple[int, int]] = []
        owners: list[list[int]] = []
        cell_edges: list[tuple[list[int], list[int]]] = []
        for c, loop in enumerate(loops):
            if len(loop) < 3:
                raise MeshError(f"cell {c} has fewer than 3 vertices")
            if len(set(loop)) != len(loop):
                raise MeshError(f"cell {c} repeats a vertex")
            if max(loop) >= len(vertices) or min(loop) < 0:
                raise MeshError(f"cell {c} references a missing vertex")
            ids, signs = [], []
            for i in range(len(loop)):
                a, b = loop[i], loop[(i + 1) % len(loop)]
                key = (min(a, b), max(a, b))
                if key not in edge_index:
                    edge_index[key] = len(endpoints)
                    endpoints.append((a, b))
                    owners.append([c])
                    signs.append(1)
                else:
                    e = edge_index[key]
                    owners[e].append(c)
                    if len(owners[e]) > 2:
                        raise MeshError(f"edge {key} shared by more than two cells")
                    signs.append(1 if owners[e][0] == c else -1)
                ids.append(edge_index[key])
            cell_edges.append((ids, signs))

        edges = []
        for (a, b), own in zip(endpoints, owners):
            p, q = vertices[a], vertices[b]
            length = float(np.hypot(*(q - p)))
            if length <= 0.0:
                raise MeshError(f"degenerate edge ({a}, {b})")
            tangent = (q - p) / length
            normal = np.array([tangent[1], -tangent[0]])
            edges.append(Edge(
                endpoint_ids=(a, b),
                left_cell=own[0],
                right_cell=own[1] if len(own) == 2 else None,
                length=length,
                normal=normal,
                tangent=tangent,
                start=p.copy(),
            ))

        cells = []
        for loop, (ids, signs) in zip(loops, cell_edges):
            xy = vertices[list(loop)]
            area, centroid = _polygon_area_centroid(xy)
            cells.append(Cell(
                vertex_ids=loop,
                centroid=centroid,
                diameter=_diameter(xy),
                area=area,
                edge_ids=tuple(ids),
                edge_signs=tuple(signs),
            ))
        return cls(vertices, cells, edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def h(self) -> float:
        return max(c.diameter for c in self.cells)

    def cell_vertices(self, cell_id: int) -> np.ndarray:
        return self.vertices[list(self.cells[cell_id].vertex_ids)]

    def outward_normal(self, cell_id: int, local_edge: int) -> np.ndarray:
        cell = self.cells[cell_id]
        return cell.edge_signs[local_edge] * self.edges[cell.edge_ids[local_edge]].normal

    def cell_vertex_lists(self) -> list[tuple[int, ...]]:
        return [c.vertex_ids for c in self.cells]

    def validate(self) -> None:
        """Check the structural invariants; raise :class:`MeshError` on failure."""
        for i, c in enumerate(self.cells):
            if not c.area > 0.0:
                raise MeshError(f"cell {i} has non-positive area {c.area:g} (not counter-clockwise?)")
            if not _is_simple(self.cell_vertices(i)):
                raise MeshError(f"cell {i} is self-intersecting")
            closure = sum(self.outward_normal(i, j) * self.edges[e].length
                          for j, e in enumerate(c.edge_ids))
            if np.abs(closure).max() > 1e-12 * max(1.0, c.diameter):
                raise MeshError(f"cell {i} boundary does not close")
        for i, e in enumerate(self.edges):
            if abs(np.hypot(*e.normal) - 1.0) > 1e-12 or abs(e.normal @ e.tangent) > 1e-12:
                raise MeshError(f"edge {i} has a bad normal/tangent frame")
            if e.right_cell is not None and e.right_cell <= e.left_cell:
                raise MeshError(f"edge {i} violates the left-cell ordering")
            # n must point away from the left cell's centroid side
            d = e.midpoint - self.cells[e.left_cell].centroid
            if d @ e.normal <= 0.0:
                raise MeshError(f"edge {i} normal does not point out of its left cell")
        euler = self.n_vertices - self.n_edges + self.n_cells
        if euler != 1:
            raise MeshError(f"Euler characteristic V-E+C = {euler}, expected 1")
        h = self.h
        if not (np.isfinite(h) and h > 0):
            raise MeshError("mesh size is not positive and finite")


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def _is_simple(xy: np.ndarray) -> bool:
    m = len(xy)
    if m == 3:
        return True
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % m], xy[j], xy[(j + 1) % m]):
                return False
    return True


def _grid_vertices(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([x.ravel(), y.ravel()])


def structured_triangle_mesh(n: int) -> Mesh:
    """``n x n`` squares, each cut along its lower-left/upper-right diagonal."""
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    n = int(n)
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))
            cells.append((a, c, d))
    return Mesh.from_cells(_grid_vertices(n), cells)


def structured_quad_mesh(n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    n = int(n)
    vid = lambda i, j: j * (n + 1) + i  # noqa: E731
    cells = [(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
             for j in range(n) for i in range(n)]
    return Mesh.from_cells(_grid_vertices(n), cells)


def perturb_interior(mesh: Mesh, factor: float, seed: int = 0) -> Mesh:
    """Randomly displace interior vertices by at most ``factor * h``.

    The displacement is halved until every cell keeps a positive area; after
    ten halvings a :class:`MeshError` is raised.
    """
    if not 0.0 <= factor <= 0.2:
        raise MeshError(f"perturbation factor must lie in [0, 0.2], got {factor}")
    if factor == 0.0:
        return Mesh.from_cells(mesh.vertices.copy(), mesh.cell_vertex_lists())
    on_boundary = np.zeros(mesh.n_vertices, dtype=bool)
    for e in mesh.boundary_edge_ids:
        on_boundary[list(mesh.edges[e].endpoint_ids)] = True
    interior = np.flatnonzero(~on_boundary)

    rng = np.random.default_rng(seed)
    radius = np.sqrt(rng.random(len(interior)))
    angle = 2.0 * np.pi * rng.random(len(interior))
    unit = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])

    scale = factor * mesh.h
    for _ in range(11):
        xy = mesh.vertices.copy()
        xy[interior] += scale * unit
        candidate = Mesh.from_cells(xy, mesh.cell_vertex_lists())
        if all(c.area > 0.0 for c in candidate.cells):
            return candidate
        scale *= 0.5
    raise MeshError("could not keep cell areas positive after 10 halvings")


def save_mesh(mesh: Mesh, path) -> None:
    """Write the ``wgmesh 1`` text format (see README)."""
    lines = ["wgmesh 1", str(mesh.n_vertices)]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(str(mesh.n_cells))
    lines += [" ".join(map(str, c.vertex_ids)) for c in mesh.cells]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    """Read a ``wgmesh 1`` file and validate it."""
    tokens = [ln.strip() for ln in Path(path).read_text().splitlines()]
    tokens = [ln for ln in tokens if ln and not ln.startswith("#")]
    try:
        if tokens[0].split() != ["wgmesh", "1"]:
            raise MeshError(f"{path}: missing 'wgmesh 1' header")
        nv = int(tokens[1])
        verts = [tuple(map(float, ln.split())) for ln in tokens[2:2 + nv]]
        nc = int(tokens[2 + nv])
        cells = [tuple(map(int, ln.split())) for ln in tokens[3 + nv:3 + nv + nc]]
    except (IndexError, ValueError) as exc:
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    if len(verts) != nv or len(cells) != nc or any(len(v) != 2 for v in verts):
        raise MeshError(f"{path}: vertex or cell count mismatch")
    mesh = Mesh.from_cells(np.array(verts), cells)
    mesh.validate()
    return mesh
