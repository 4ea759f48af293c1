"""Command-line front end: ``wgbih solve | convergence | check``.

Every option may also come from a flat ``key=value`` config file passed with
``--config``; flags given on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import WGSpace
from .mesh import MeshError, load_mesh, perturb_interior, structured_quad_mesh, structured_triangle_mesh
from .schemes import SCHEMES, solve_hwg_dense, solve_wg
from .schur import recover_multiplier, solve_schur
from .solvers import SolverError
from .verify import convergence_study, error_report, manufactured

CSV_HEADER = ["h", "energy_error", "xi_error_proj", "xi_error_exact", "l2_error",
              "rate_energy", "rate_xi", "iterations"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mesh: str = "tri"            # tri | quad | path to a wgmesh file
    n: int = 4
    ns: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    perturb: float = 0.0
    seed: int = 0
    k: int = 2
    scheme: str = "schur"
    ms: str = "sin"
    tol: float = 1e-10
    out: str | None = None
    vtk: str | None = None
    threads: int = 0

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must satisfy k >= 2 (got k={self.k})")
        if self.n < 1 or any(n < 1 for n in self.ns):
            raise ConfigError("n must satisfy n >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)} (got {self.scheme!r})")
        if not 0.0 < self.tol < 1.0:
            raise ConfigError(f"tol must lie in (0, 1) (got {self.tol})")
        if not 0.0 <= self.perturb <= 0.2:
            raise ConfigError(f"perturb must lie in [0, 0.2] (got {self.perturb})")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")

    def build_mesh(self, n: int | None = None):
        n = self.n if n is None else n
        if self.mesh == "tri":
            mesh = structured_triangle_mesh(n)
        elif self.mesh == "quad":
            mesh = structured_quad_mesh(n)
        else:
            mesh = load_mesh(self.mesh)
        if self.perturb > 0:
            mesh = perturb_interior(mesh, self.perturb, self.seed)
        mesh.validate()
        return mesh


_CONVERTERS = {
    "n": int, "perturb": float, "seed": int, "k": int, "tol": float, "threads": int,
    "ns": lambda s: [int(t) for t in str(s).replace(" ", "").split(",") if t],
}


def parse_config_file(path) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in RunConfig.__dataclass_fields__:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def make_config(values: dict) -> RunConfig:
    cfg = RunConfig()
    for key, value in values.items():
        if value is None:
            continue
        try:
            setattr(cfg, key, _CONVERTERS.get(key, str)(value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    cfg.validate()
    return cfg


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else f"{x:.17g}"


def _solve(cfg: RunConfig, mesh, ms):
    space = WGSpace(mesh, cfg.k)
    f, bc = (ms.f, ms.boundary_data()) if ms is not None else (None, None)
    if cfg.scheme == "wg":
        sol = solve_wg(space, f=f, bc=bc, tol=cfg.tol)
        sol.multiplier = recover_multiplier(sol.u)
    elif cfg.scheme == "hwg-dense":
        sol = solve_hwg_dense(space, f=f, bc=bc)
    else:
        sol = solve_schur(space, f=f, bc=bc, tol=cfg.tol)
    return space, sol


def write_vtk(path, mesh, values) -> None:
    """Legacy ASCII unstructured grid with one cell scalar ``u0``."""
    lines = ["# vtk DataFile Version 3.0", "wgbih u0 at cell centroids", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    size = sum(c.n_edges + 1 for c in mesh.cells)
    lines.append(f"CELLS {mesh.n_cells} {size}")
    lines += [" ".join(map(str, (c.n_edges, *c.vertex_ids))) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["5" if c.n_edges == 3 else "7" for c in mesh.cells]
    lines += [f"CELL_DATA {mesh.n_cells}", "SCALARS u0 double 1", "LOOKUP_TABLE default"]
    lines += [f"{v:.17g}" for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_solve(cfg: RunConfig) -> int:
    mesh = cfg.build_mesh()
    ms = manufactured(cfg.ms) if cfg.ms not in ("", "none") else None
    space, sol = _solve(cfg, mesh, ms)
    summary = {
        "scheme": cfg.scheme, "k": cfg.k, "mesh": cfg.mesh, "n": cfg.n, "h": mesh.h,
        "dofs": {"cell": space.n_cell_dofs,
                 "trace": mesh.n_edges * space.n_trace,
                 "multiplier": space.n_multiplier},
        "solver": {"method": sol.report.method, "iterations": sol.report.iterations,
                   "residual": sol.report.residual, "converged": sol.report.converged},
    }
    if cfg.scheme == "schur":
        summary["reduced_unknowns"] = sol.info["reduced_unknowns"]
    if cfg.scheme == "hwg-dense":
        summary["max_jump"] = sol.max_jump
    if ms is not None:
        rep = error_report(ms, sol)
        summary.update(manufactured_solution=ms.id, energy_error=rep.energy_error,
                       xi_error_proj=rep.xi_error_proj, xi_error_exact=rep.xi_error_exact,
                       l2_error=rep.l2_error)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n")
    else:
        print(text)
    if cfg.vtk:
        values = []
        for c, cell in enumerate(mesh.cells):
            psi = space.cell_basis(c).eval(cell.centroid[None, :])[:, 0]
            values.append(float(sol.u.local(c)[: space.n_cell_fn] @ psi))
        write_vtk(cfg.vtk, mesh, values)
    return 0


def convergence_csv(cfg: RunConfig) -> str:
    ms = manufactured(cfg.ms)
    meshes = [cfg.build_mesh(n) for n in cfg.ns]
    table = convergence_study(cfg.scheme, ms, cfg.k, meshes, tol=cfg.tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r, re, rx in zip(table.reports, table.rate_energy, table.rate_xi):
        w.writerow([_fmt(v) for v in (r.h, r.energy_error, r.xi_error_proj, r.xi_error_exact,
                                      r.l2_error, re, rx, r.iterations)])
    return buf.getvalue()


def cmd_convergence(cfg: RunConfig) -> int:
    if len(cfg.ns) < 2:
        raise ConfigError("convergence needs at least two mesh sizes (--ns 4,8,...)")
    text = convergence_csv(cfg)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_check(cfg: RunConfig) -> int:
    from . import checks
    if cfg.mesh not in ("tri", "quad"):
        cfg.build_mesh()  # validates a user mesh file
    ok = True
    for name, fn in checks.SUITES:
        t0 = time.perf_counter()
        try:
            passed, detail = fn(cfg)
        except Exception as exc:  # a crashing suite is a failing suite
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail} ({time.perf_counter() - t0:.2f} s)")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--mesh", help="tri, quad or a wgmesh file path")
    common.add_argument("--n", help="subdivisions per side")
    common.add_argument("--ns", help="comma-separated subdivisions (convergence)")
    common.add_argument("--perturb", help="interior vertex perturbation, fraction of h")
    common.add_argument("--seed", help="perturbation seed")
    common.add_argument("--k", help="polynomial degree (>= 2)")
    common.add_argument("--scheme", help="wg | hwg-dense | schur")
    common.add_argument("--ms", help="manufactured solution id: sin, bubble, poly2")
    common.add_argument("--tol", help="CG relative tolerance")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--vtk", help="optional legacy VTK dump of u0 (solve)")
    common.add_argument("--threads", help="thread budget (0 = auto)")

    parser = argparse.ArgumentParser(prog="wgbih", description="Weak Galerkin biharmonic solver")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one problem, write a JSON summary")
    sub.add_parser("convergence", parents=[common], help="mesh sequence, write a CSV rate table")
    sub.add_parser("check", parents=[common], help="run the invariant suites")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = parse_config_file(args.config) if args.config else {}
        values.update({k: v for k, v in vars(args).items()
                       if k not in ("command", "config") and v is not None})
        cfg = make_config(values)
        return {"solve": cmd_solve, "convergence": cmd_convergence, "check": cmd_check}[args.command](cfg)
    except (ConfigError, MeshError, SolverError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
