import numpy as np
import pytest

from wgbih.mesh import (MeshError, load_mesh, perturb_interior, save_mesh,
                        structured_quad_mesh, structured_triangle_mesh)


def enumerate_triangle_grid(n):
    """Independent count: collect undirected edges of the split-square grid."""
    edges = set()
    for j in range(n):
        for i in range(n):
            a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
            for tri in ((a, b, c), (a, c, d)):
                for p, q in zip(tri, tri[1:] + tri[:1]):
                    edges.add(frozenset((p, q)))
    def on_boundary(edge):
        p, q = tuple(edge)
        return any(p[a] == q[a] == b for a in (0, 1) for b in (0, n))

    boundary = [e for e in edges if on_boundary(e)]
    return (n + 1) ** 2, len(edges), 2 * n * n, len(boundary)


def test_n1_triangles_by_hand():
    m = structured_triangle_mesh(1)
    assert (m.n_vertices, m.n_edges, m.n_cells) == (4, 5, 2)
    assert m.n_vertices - m.n_edges + m.n_cells == 1


@pytest.mark.parametrize("n, expected", [(2, (9, 16, 8)), (4, (25, 56, 32))])
def test_triangle_counts(n, expected):
    m = structured_triangle_mesh(n)
    v, e, c, nb = enumerate_triangle_grid(n)
    assert (v, e, c) == expected
    assert nb == 4 * n == len(m.boundary_edge_ids)
    assert (m.n_vertices, m.n_edges, m.n_cells) == expected


def test_triangle_boundary_edges_n4():
    m = structured_triangle_mesh(4)
    assert len(m.boundary_edge_ids) == 16
    assert m.h == pytest.approx(np.sqrt(2) / 4)


@pytest.mark.parametrize("n, cells, edges, verts", [(1, 1, 4, 4), (2, 4, 12, 9), (3, 9, 24, 16)])
def test_quad_counts(n, cells, edges, verts):
    m = structured_quad_mesh(n)
    assert (m.n_cells, m.n_edges, m.n_vertices) == (cells, edges, verts)
    assert edges == 2 * n * (n + 1)
    assert all(c.diameter == pytest.approx(np.sqrt(2) / n) for c in m.cells)


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_generators_reject_bad_n(bad):
    with pytest.raises(MeshError):
        structured_triangle_mesh(bad)
    with pytest.raises(MeshError):
        structured_quad_mesh(bad)


@pytest.mark.parametrize("mesh", [structured_triangle_mesh(3), structured_quad_mesh(3),
                                  perturb_interior(structured_triangle_mesh(4), 0.15, 3)])
def test_orientation_invariants(mesh):
    mesh.validate()
    for i, e in enumerate(mesh.edges):
        assert np.linalg.norm(e.normal) == pytest.approx(1, abs=1e-12)
        assert e.normal @ e.tangent == pytest.approx(0, abs=1e-12)
        # tangent is n rotated 90 degrees counter-clockwise
        np.testing.assert_allclose(e.tangent, [-e.normal[1], e.normal[0]], atol=1e-15)
        if not e.is_boundary:
            L, R = e.left_cell, e.right_cell
            assert L < R
            jL = mesh.cells[L].edge_ids.index(i)
            jR = mesh.cells[R].edge_ids.index(i)
            np.testing.assert_allclose(mesh.outward_normal(L, jL), e.normal)
            np.testing.assert_allclose(mesh.outward_normal(R, jR), -e.normal)
    for c, cell in enumerate(mesh.cells):
        closure = sum(mesh.outward_normal(c, j) * mesh.edges[e].length for j, e in enumerate(cell.edge_ids))
        np.testing.assert_allclose(closure, 0, atol=1e-14)
        assert cell.area > 0


def test_cell_metrics():
    m = structured_triangle_mesh(2)
    c = m.cells[0]
    assert c.area == pytest.approx(1 / 8)
    assert c.diameter == pytest.approx(np.sqrt(2) / 2)
    np.testing.assert_allclose(c.centroid, m.cell_vertices(0).mean(axis=0))


def test_perturb_zero_is_identity():
    m = structured_triangle_mesh(3)
    p = perturb_interior(m, 0.0, seed=1)
    np.testing.assert_array_equal(p.vertices, m.vertices)


def test_perturb_deterministic_and_valid():
    m = structured_triangle_mesh(4)
    a, b = perturb_interior(m, 0.1, seed=5), perturb_interior(m, 0.1, seed=5)
    assert a.vertices.tobytes() == b.vertices.tobytes()
    a.validate()
    assert a.n_vertices - a.n_edges + a.n_cells == 1
    assert min(c.area for c in a.cells) > 0
    moved = np.linalg.norm(a.vertices - m.vertices, axis=1)
    assert moved.max() <= 0.1 * m.h + 1e-15
    bnd = {v for e in m.boundary_edge_ids for v in m.edges[e].endpoint_ids}
    assert np.all(moved[list(bnd)] == 0)


def test_perturb_rejects_large_factor():
    with pytest.raises(MeshError):
        perturb_interior(structured_triangle_mesh(2), 0.3)


def test_roundtrip(tmp_path):
    m = perturb_interior(structured_quad_mesh(3), 0.1, 2)
    path = tmp_path / "m.wgmesh"
    save_mesh(m, path)
    assert path.read_text().startswith("wgmesh 1\n")
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    assert back.cell_vertex_lists() == m.cell_vertex_lists()


def test_load_rejects_corrupt(tmp_path):
    path = tmp_path / "bad.wgmesh"
    path.write_text("wgmesh 1\n3\n0 0\n1 0\n0 1\n1\n0 2 1\n")  # clockwise triangle
    with pytest.raises(MeshError, match="area"):
        load_mesh(path)
    path.write_text("nonsense\n")
    with pytest.raises(MeshError):
        load_mesh(path)
