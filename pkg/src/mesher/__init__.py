"""Mesh extraction, OBJ files and Chamfer evaluation."""

from .extract import evaluate_grid, extract_mesh, marching_cubes
from .mesh import TriangleMesh, read_mesh, write_mesh
from .metrics import ChamferResult, chamfer_l1, nearest_distances, sample_surface

__all__ = [
    "ChamferResult",
    "TriangleMesh",
    "chamfer_l1",
    "evaluate_grid",
    "extract_mesh",
    "marching_cubes",
    "nearest_distances",
    "read_mesh",
    "sample_surface",
    "write_mesh",
]
