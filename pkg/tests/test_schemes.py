import numpy as np
import pytest

from wgbih.assembly import WGSpace, multiplier_matrix
from wgbih.mesh import structured_quad_mesh, structured_triangle_mesh
from wgbih.schemes import (DENSE_CAP, check_equivalence, galerkin_residual, solve_hwg_dense,
                           solve_wg)
from wgbih.schur import solve_schur
from wgbih.solvers import SolverError
from wgbih.verify import energy_norm, error_report
from wgbih.weakops import WGField


def test_zero_data_gives_zero(tri2):
    for sol in (solve_wg(tri2), solve_hwg_dense(tri2), solve_schur(tri2)):
        assert not np.any(np.abs(sol.u.coeffs) > 1e-14)
    assert not np.any(solve_hwg_dense(tri2).multiplier.coeffs)


def test_boundary_entries_equal_lift(tri4, ms_sin):
    from wgbih.assembly import apply_boundary_conditions
    G = apply_boundary_conditions(ms_sin.boundary_data(), tri4).coeffs
    mask = tri4.shared_boundary_mask()
    for sol in (solve_wg(tri4, f=ms_sin.f, bc=ms_sin.boundary_data()),
                solve_schur(tri4, f=ms_sin.f, bc=ms_sin.boundary_data())):
        np.testing.assert_array_equal(sol.u.coeffs[mask], G[mask[tri4.n_cell_dofs:]])


@pytest.mark.parametrize("solver", ["cg", "dense"])
def test_quadratic_is_reproduced(tri4, ms_poly2, solver):
    sol = solve_wg(tri4, f=ms_poly2.f, bc=ms_poly2.boundary_data(), solver=solver)
    assert error_report(ms_poly2, sol).energy_error <= 1e-7


def test_quadratic_on_quads(ms_poly2):
    sol = solve_wg(WGSpace(structured_quad_mesh(3), 2), f=ms_poly2.f, bc=ms_poly2.boundary_data())
    assert error_report(ms_poly2, sol).energy_error <= 1e-7


def test_sine_error_halves(ms_sin):
    errs = [error_report(ms_sin, solve_wg(structured_triangle_mesh(n), 2, ms_sin.f, ms_sin.boundary_data())).energy_error
            for n in (8, 16)]
    assert errs[0] / errs[1] >= 1.8


def test_hwg_traces_are_continuous(tri4, ms_bubble):
    sol = solve_hwg_dense(tri4, f=ms_bubble.f, bc=ms_bubble.boundary_data())
    assert sol.max_jump <= 1e-9 * max(1.0, np.abs(sol.u.coeffs).max())
    # b(u_h, rho) for every basis rho of the multiplier space
    B = multiplier_matrix(tri4)
    assert np.abs(B @ sol.info["two_sided"].coeffs).max() <= 1e-9


@pytest.mark.parametrize("ms", ["ms_sin", "ms_bubble"])
def test_three_schemes_agree(tri4, ms, request):
    ms = request.getfixturevalue(ms)
    args = dict(f=ms.f, bc=ms.boundary_data())
    a, b, c = solve_wg(tri4, **args), solve_hwg_dense(tri4, **args), solve_schur(tri4, **args)
    assert check_equivalence(a, b).rel_coeff_diff <= 1e-8
    for x, y in ((a, b), (a, c), (b, c)):
        assert check_equivalence(x, y).energy_diff <= 1e-7


def test_equivalence_of_identical_inputs(tri2, ms_sin):
    a = solve_wg(tri2, f=ms_sin.f, bc=ms_sin.boundary_data())
    rep = check_equivalence(a, a)
    assert rep.max_coeff_diff == rep.energy_diff == 0 and rep.passed


def test_equivalence_layout_mismatch(tri2, tri4):
    with pytest.raises(ValueError):
        check_equivalence(solve_wg(tri2), solve_wg(tri4))


def test_galerkin_orthogonality(tri4, ms_sin):
    sol = solve_wg(tri4, f=ms_sin.f, bc=ms_sin.boundary_data(), tol=1e-12)
    r = galerkin_residual(sol, ms_sin.f)
    scale = max(abs(o.combined).max() for o in tri4.operators)
    assert np.abs(r).max() <= 1e-10 * scale


def test_dense_cap_enforced():
    space = WGSpace(structured_triangle_mesh(16), 2)
    with pytest.raises(SolverError, match="schur"):
        solve_hwg_dense(space, cap=100)
    assert DENSE_CAP == 6000


def test_cg_failure_is_reported(tri4, ms_sin):
    with pytest.raises(SolverError, match="did not converge"):
        solve_wg(tri4, f=ms_sin.f, bc=ms_sin.boundary_data(), max_iter=2)


def test_energy_norm_of_solution_positive(tri2, ms_sin):
    sol = solve_wg(tri2, f=ms_sin.f, bc=ms_sin.boundary_data())
    assert energy_norm(sol.u) > 0
    assert isinstance(sol.u, WGField) and sol.scheme == "wg"
