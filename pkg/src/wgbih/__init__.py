"""Weak Galerkin (WG) and hybridized WG finite elements for the biharmonic
equation on polygonal meshes, with a Schur-complement trace solver."""
from .assembly import BoundaryData, Multiplier, TraceField, WGSpace
from .mesh import Mesh, structured_quad_mesh, structured_triangle_mesh
from .schemes import Solution, check_equivalence, solve_hwg_dense, solve_wg
from .schur import solve_schur
from .verify import manufactured

__all__ = [
    "BoundaryData", "Mesh", "Multiplier", "Solution", "TraceField", "WGSpace",
    "check_equivalence", "manufactured", "solve_hwg_dense", "solve_schur", "solve_wg",
    "structured_quad_mesh", "structured_triangle_mesh",
]
