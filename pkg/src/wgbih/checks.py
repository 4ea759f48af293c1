"""Invariant suites behind ``wgbih check``; each returns ``(passed, detail)``."""
from __future__ import annotations

import numpy as np

from .assembly import Multiplier, WGSpace, b_form, b_form_elementwise
from .mesh import perturb_interior, structured_triangle_mesh
from .schemes import check_equivalence, solve_hwg_dense, solve_wg
from .schur import densify_S0, solve_schur
from .verify import manufactured, random_polynomial
from .weakops import WGField, project_cell, project_Qh, weak_hessian_maps_by_parts


def commutativity_deviation(space: WGSpace, n_poly: int, seed: int = 0) -> float:
    """Worst relative gap between W_ij(Q_h w) and the P_{k-2} projection of d_ij w
    over random polynomials w of degree <= k + 2 and all cells."""
    rng = np.random.default_rng(seed)
    k, mesh = space.k, space.mesh
    nr = (k - 1) * k // 2
    worst = 0.0
    for _ in range(n_poly):
        w = random_polynomial(k + 2, rng)
        Qw = project_Qh(w.u, w.grad, space)
        for c in range(mesh.n_cells):
            W = space.operators[c].weak_hessian
            loc = Qw.local(c)
            for i in range(2):
                for j in range(2):
                    got = W[i, j] @ loc
                    want = project_cell(lambda x, y: w.hess(x, y)[:, i, j], mesh, c, k - 2,
                                        basis=space.cell_basis(c))[:nr]
                    scale = max(np.abs(want).max(), 1.0)
                    worst = max(worst, np.abs(got - want).max() / scale)
    return worst


def b_form_deviation(space: WGSpace, n_pairs: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        v = WGField(space, "two-sided", rng.standard_normal(space.n_two_sided))
        lam = Multiplier(space, rng.standard_normal(space.n_multiplier))
        a, b = b_form(v, lam), b_form_elementwise(v, lam)
        worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return worst


def _commutativity(cfg):
    space = WGSpace(perturb_interior(structured_triangle_mesh(4), 0.1, cfg.seed), cfg.k)
    dev = commutativity_deviation(space, 10, cfg.seed)
    return dev <= 1e-9, f"max relative deviation {dev:.2e}"


def _ibp(cfg):
    mesh = perturb_interior(structured_triangle_mesh(2), 0.1, cfg.seed)
    space = WGSpace(mesh, cfg.k)
    dev = max(np.abs(space.operators[c].weak_hessian - weak_hessian_maps_by_parts(mesh, c, cfg.k)).max()
              for c in range(mesh.n_cells))
    return dev <= 1e-11 * max(1.0, max(np.abs(o.weak_hessian).max() for o in space.operators)), \
        f"max deviation {dev:.2e}"


def _b_form(cfg):
    dev = b_form_deviation(WGSpace(structured_triangle_mesh(3), cfg.k), 20, cfg.seed)
    return dev <= 1e-12, f"max relative deviation {dev:.2e}"


def _s0(cfg):
    S = densify_S0(WGSpace(structured_triangle_mesh(2), 2))
    asym = np.abs(S - S.T).max() / np.abs(S).max()
    lmin = np.linalg.eigvalsh(0.5 * (S + S.T)).min()
    return asym <= 1e-10 and lmin > 0, f"asymmetry {asym:.1e}, min eigenvalue {lmin:.3e}"


def _equivalence(cfg):
    ms = manufactured("sin")
    space = WGSpace(structured_triangle_mesh(2), 2)
    a = solve_wg(space, f=ms.f, bc=ms.boundary_data())
    b = solve_hwg_dense(space, f=ms.f, bc=ms.boundary_data())
    c = solve_schur(space, f=ms.f, bc=ms.boundary_data())
    ab, ac = check_equivalence(a, b), check_equivalence(a, c)
    ok = ab.energy_diff <= 1e-7 and ac.energy_diff <= 1e-7 and b.max_jump <= 1e-9
    return ok, f"wg/hwg {ab.energy_diff:.1e}, wg/schur {ac.energy_diff:.1e}, hwg jump {b.max_jump:.1e}"


SUITES = [
    ("commutativity", _commutativity),
    ("weak-hessian-by-parts", _ibp),
    ("b-form", _b_form),
    ("s0-spd", _s0),
    ("equivalence", _equivalence),
]
