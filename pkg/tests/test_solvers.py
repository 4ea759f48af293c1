import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgbih.assembly import WGSpace, assemble_wg
from wgbih.mesh import structured_triangle_mesh
from wgbih.solvers import SolverError, cholesky_solve, conjugate_gradient, dense_solve
from wgbih.verify import manufactured


def test_dense_identity_and_hand_case():
    b = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(dense_solve(np.eye(3), b), b)
    np.testing.assert_allclose(dense_solve([[2, 1], [1, 2]], [3, 3]), [1, 1], rtol=1e-15)


def test_dense_random_residual(rng):
    A = rng.standard_normal((50, 50)) + 50 * np.eye(50)
    b = rng.standard_normal(50)
    x = dense_solve(A, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * (np.linalg.norm(A) * np.linalg.norm(x) + np.linalg.norm(b))


def test_dense_rejects_singular():
    with pytest.raises(SolverError):
        dense_solve([[1, 2], [2, 4]], [1, 1])
    with pytest.raises(SolverError):
        dense_solve(np.zeros((3, 2)), np.zeros(3))


def test_cholesky_cases(rng):
    np.testing.assert_allclose(cholesky_solve(np.diag([1.0, 4, 9]), [1, 4, 9]), [1, 1, 1])
    V = rng.standard_normal((30, 12))
    G = V.T @ V
    b = rng.standard_normal(12)
    x = cholesky_solve(G, b)
    assert np.linalg.norm(G @ x - b) <= 1e-10 * np.linalg.norm(b) * np.linalg.cond(G)
    np.testing.assert_allclose(x, dense_solve(G, b), rtol=1e-10 * np.linalg.cond(G))
    with pytest.raises(SolverError):
        cholesky_solve(np.diag([1.0, -1.0]), [1, 1])


def test_cg_identity_one_step():
    b = np.arange(1.0, 6.0)
    x, rep = conjugate_gradient(lambda v: v, b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b)


def test_cg_finite_termination():
    d = np.arange(1.0, 11.0)
    x, rep = conjugate_gradient(lambda v: d * v, np.ones(10), tol_rel=1e-12)
    assert rep.converged and rep.iterations <= 10
    np.testing.assert_allclose(x, 1 / d, rtol=1e-11)


def test_cg_zero_rhs():
    x, rep = conjugate_gradient(lambda v: 2 * v, np.zeros(4))
    assert rep.iterations == 0 and not x.any()


def test_cg_detects_indefinite():
    with pytest.raises(SolverError, match="breakdown"):
        conjugate_gradient(lambda v: np.array([1.0, -1.0]) * v, np.array([0.0, 1.0]))


def test_cg_reports_non_convergence():
    d = np.logspace(0, 8, 200)
    _, rep = conjugate_gradient(lambda v: d * v, np.ones(200), tol_rel=1e-14, max_iter=3)
    assert not rep.converged and rep.iterations == 3 and rep.residual > 1e-14


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 31 - 1))
def test_cg_true_residual_meets_tolerance(n, seed):
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, n))
    A = V @ V.T + n * np.eye(n)
    b = rng.standard_normal(n)
    x, rep = conjugate_gradient(lambda v: A @ v, b, tol_rel=1e-10, precond=np.diag(A))
    assert rep.converged
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_cg_on_wg_system_matches_dense():
    ms = manufactured("bubble")
    space = WGSpace(structured_triangle_mesh(4), 2)
    sys_ = assemble_wg(space, ms.f, ms.boundary_data())
    A = sys_.matrix
    x, rep = conjugate_gradient(lambda v: A @ v, sys_.rhs, tol_rel=1e-10, precond=A.diagonal())
    assert rep.converged
    ref = dense_solve(A.toarray(), sys_.rhs)
    assert np.abs(x - ref).max() <= 1e-8 * np.abs(ref).max()
    # statistical symmetry check of the operator
    rng = np.random.default_rng(0)
    for _ in range(3):
        p, q = rng.standard_normal((2, A.shape[0]))
        assert (A @ p) @ q == pytest.approx(p @ (A @ q), rel=1e-12)
