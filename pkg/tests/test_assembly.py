import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from wgbih.assembly import (BoundaryData, Multiplier, WGSpace, apply_boundary_conditions,
                            assemble_hwg, assemble_wg, b_form, b_form_elementwise, global_matrix,
                            jump, multiplier_matrix, similarity)
from wgbih.basis import edge_basis, edge_quadrature
from wgbih.mesh import perturb_interior, structured_quad_mesh, structured_triangle_mesh
from wgbih.schemes import saddle_matrix_nonsingular
from wgbih.verify import manufactured, xi_norm
from wgbih.weakops import WGField


def side_values(space, v, inc, pts_params, e):
    """Evaluate the (v_b, v_gx, v_gy) polynomials of one incidence at edge parameters."""
    chi = edge_basis(space.mesh, e, space.k - 2).eval(pts_params)
    block = space.side_traces(v.coeffs)[inc].reshape(3, space.n_edge_fn)
    return block @ chi


@pytest.fixture(scope="module")
def space3():
    return WGSpace(perturb_interior(structured_triangle_mesh(3), 0.1, 8), 3)


def test_jump_zero_for_shared_fields(space3, rng):
    v = WGField(space3, "shared", rng.standard_normal(space3.n_shared))
    for e in space3.interior_edges:
        np.testing.assert_array_equal(jump(v, e), 0)


def test_jump_one_sided_copy(tri2):
    x = np.zeros(tri2.n_two_sided)
    e = tri2.interior_edges[0]
    L, _ = tri2.edge_sides[e]
    x[tri2.incidence_dofs(L)] = [1.5, -2.0, 0.25]
    np.testing.assert_allclose(jump(WGField(tri2, "two-sided", x), e), [1.5, -2.0, 0.25])


def test_jump_l2_matches_quadrature(space3, rng):
    v = WGField(space3, "two-sided", rng.standard_normal(space3.n_two_sided))
    for e in space3.interior_edges:
        q = edge_quadrature(space3.mesh, e, 2 * space3.k)
        L, R = space3.edge_sides[e]
        diff = side_values(space3, v, L, q.params, e) - side_values(space3, v, R, q.params, e)
        direct = q.integrate((diff ** 2).sum(axis=0))
        assert np.sum(jump(v, e) ** 2) == pytest.approx(direct, rel=1e-12)


def test_similarity_cases(tri2):
    lam = Multiplier(tri2, np.arange(tri2.n_multiplier, dtype=float) + 1)
    sides = lam.to_sides()
    for e in tri2.interior_edges:
        np.testing.assert_array_equal(similarity(sides, tri2, e), 0)
    const = np.full((tri2.n_incidences, tri2.n_trace), 0.75)
    for e in tri2.interior_edges:
        np.testing.assert_allclose(similarity(const, tri2, e), 1.5)
    e = tri2.boundary_edges[0]
    np.testing.assert_allclose(similarity(const, tri2, e), 0.75)


def test_b_form_vanishes_on_shared(space3, rng):
    v = WGField(space3, "shared", rng.standard_normal(space3.n_shared))
    lam = Multiplier(space3, rng.standard_normal(space3.n_multiplier))
    assert abs(b_form(v, lam)) < 1e-14


def test_b_form_three_ways(space3, rng):
    B = multiplier_matrix(space3)
    for _ in range(5):
        v = WGField(space3, "two-sided", rng.standard_normal(space3.n_two_sided))
        lam = Multiplier(space3, rng.standard_normal(space3.n_multiplier))
        brute = 0.0
        for e in space3.interior_edges:
            q = edge_quadrature(space3.mesh, e, 2 * space3.k)
            L, R = space3.edge_sides[e]
            diff = side_values(space3, v, L, q.params, e) - side_values(space3, v, R, q.params, e)
            lam_vals = lam.on_edge(e).reshape(3, -1) @ edge_basis(space3.mesh, e, space3.k - 2).eval(q.params)
            brute += q.integrate((diff * lam_vals).sum(axis=0))
        ref = b_form(v, lam)
        assert ref == pytest.approx(brute, rel=1e-12)
        assert b_form_elementwise(v, lam) == pytest.approx(ref, rel=1e-12)
        assert (B @ v.coeffs) @ lam.coeffs == pytest.approx(ref, rel=1e-12)


def test_xi_norm_positive_definite(tri2, rng):
    assert xi_norm(Multiplier(tri2, np.zeros(tri2.n_multiplier))) == 0
    for _ in range(5):
        assert xi_norm(Multiplier(tri2, rng.standard_normal(tri2.n_multiplier))) > 0


def test_embedding_preserves_energy(space3, rng):
    A2 = global_matrix(space3, "two-sided")
    for _ in range(3):
        v = WGField(space3, "shared", rng.standard_normal(space3.n_shared))
        two = v.to_two_sided().coeffs
        assert two @ A2 @ two == pytest.approx(space3.a_s(v, v), rel=1e-12)
    np.testing.assert_array_equal(space3.two_sided_to_shared(space3.shared_to_two_sided(v.coeffs)), v.coeffs)


def test_homogeneous_lift_is_zero(tri2):
    assert not np.any(apply_boundary_conditions(BoundaryData.homogeneous(), tri2).coeffs)


def test_lift_of_linear_function(quad3):
    bc = BoundaryData.from_solution(lambda x, y: x, lambda x, y: np.column_stack([1 + 0 * x, 0 * y]))
    G = apply_boundary_conditions(bc, quad3).blocks
    for e in quad3.boundary_edges:
        root = np.sqrt(quad3.mesh.edges[e].length)
        mid = quad3.mesh.edges[e].midpoint
        np.testing.assert_allclose(G[e], [mid[0] * root, root, 0], atol=1e-14)
    np.testing.assert_array_equal(G[quad3.interior_edges], 0)


def test_lift_of_sine_solution():
    ms = manufactured("sin")
    space = WGSpace(structured_triangle_mesh(4), 2)
    G = apply_boundary_conditions(ms.boundary_data(), space).blocks
    for e in space.boundary_edges:
        ed = space.mesh.edges[e]
        assert abs(G[e, 0]) < 1e-14
        g = G[e, 1:]
        assert abs(g @ ed.tangent) < 1e-14
        q = edge_quadrature(space.mesh, e, 20)
        mean_dn = q.integrate(ms.grad(*q.points.T) @ ed.normal) / ed.length
        assert g @ ed.normal / np.sqrt(ed.length) == pytest.approx(mean_dn, rel=1e-10)


@pytest.mark.parametrize("mesh", [structured_triangle_mesh(2), structured_quad_mesh(3),
                                  perturb_interior(structured_triangle_mesh(4), 0.2, 13)])
def test_wg_matrix_spd(mesh):
    space = WGSpace(mesh, 2)
    sys_ = assemble_wg(space, lambda x, y: 0 * x, BoundaryData.homogeneous())
    A = sys_.matrix.toarray()
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    sla.cho_factor(A)  # raises if not SPD
    assert np.linalg.eigvalsh(A).min() > 0
    np.testing.assert_array_equal(sys_.rhs, 0)


def test_saddle_structure(tri2):
    sys_ = assemble_hwg(tri2, lambda x, y: 0 * x, BoundaryData.homogeneous())
    K = sys_.matrix.toarray()
    nu = len(sys_.free)
    assert K.shape == (nu + tri2.n_multiplier,) * 2
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(K[nu:, nu:], 0)
    # A_s block has no coupling between different cells' incidences
    cell_of = np.full(tri2.n_two_sided, -1)
    for c in range(tri2.mesh.n_cells):
        cell_of[tri2.local_index(c, "two-sided")] = c
    owners = cell_of[sys_.free]
    Aff = K[:nu, :nu]
    i, j = np.nonzero(Aff)
    assert np.all(owners[i] == owners[j])
    assert saddle_matrix_nonsingular(tri2)


def test_degree_below_two_rejected():
    with pytest.raises(ValueError):
        WGSpace(structured_triangle_mesh(2), 1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_b_form_identity_property(seed):
    space = WGSpace(structured_quad_mesh(2), 2)
    rng = np.random.default_rng(seed)
    v = WGField(space, "two-sided", rng.standard_normal(space.n_two_sided))
    lam = Multiplier(space, rng.standard_normal(space.n_multiplier))
    a, b = b_form(v, lam), b_form_elementwise(v, lam)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)
