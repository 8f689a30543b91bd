"""Zero-level-set extraction with marching cubes."""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import mcubes
import numpy as np
from numpy.typing import NDArray

from src.mesher.mesh import TriangleMesh
from src.utils.config import MeshConfig
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

ScalarField = Callable[[NDArray[np.float64]], NDArray[np.float64]]
Vec3 = tuple[float, float, float]


def evaluate_grid(
    field: ScalarField,
    bbox_min: Vec3,
    bbox_max: Vec3,
    resolution: int,
    slab_size: int = 16,
    workers: int = 1,
) -> NDArray[np.float64]:
    """Sample ``field`` on a ``resolution^3`` lattice indexed ``[x, y, z]``.

    The lattice is evaluated in slabs of ``slab_size`` z-planes; slabs may
    run in parallel and are written back by slab index.
    """
    if resolution < 2:
        raise RejectedInputError(f"grid resolution must be >= 2, got {resolution}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(bbox_min, bbox_max)]
    volume = np.empty((resolution, resolution, resolution))
    starts = list(range(0, resolution, slab_size))

    def slab(z0: int) -> tuple[int, NDArray[np.float64]]:
        zs = axes[2][z0 : z0 + slab_size]
        grid = np.stack(np.meshgrid(axes[0], axes[1], zs, indexing="ij"), axis=-1)
        values = np.asarray(field(grid.reshape(-1, 3)), dtype=np.float64)
        return z0, values.reshape(resolution, resolution, len(zs))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for z0, values in pool.map(slab, starts):
            volume[:, :, z0 : z0 + values.shape[2]] = values
    return volume


def marching_cubes(
    field: ScalarField,
    bbox_min: Vec3 = (-1.0, -1.0, -1.0),
    bbox_max: Vec3 = (1.0, 1.0, 1.0),
    resolution: int = 128,
    slab_size: int = 16,
    workers: int = 1,
    crop_to_unit_sphere: bool = False,
) -> TriangleMesh:
    """Triangle mesh of ``field = 0`` inside the box, vertices in world units.

    Triangles face outward (towards positive ``field``). A field without a
    sign change yields an empty mesh. With ``crop_to_unit_sphere`` triangles
    whose centroid lies outside the unit sphere are removed.
    """
    volume = evaluate_grid(field, bbox_min, bbox_max, resolution, slab_size, workers)
    if volume.min() > 0.0 or volume.max() < 0.0:
        logger.info("Field has no sign change in the box; mesh is empty")
        return TriangleMesh()

    vertices, triangles = mcubes.marching_cubes(-volume, 0.0)
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    vertices = lo + np.asarray(vertices, dtype=np.float64) * (hi - lo) / (resolution - 1)
    mesh = TriangleMesh(vertices, np.asarray(triangles, dtype=np.intp)).without_degenerate()
    if crop_to_unit_sphere and not mesh.is_empty:
        centroids = mesh.vertices[mesh.triangles].mean(axis=1)
        keep = np.linalg.norm(centroids, axis=-1) <= 1.0
        mesh = TriangleMesh(mesh.vertices, mesh.triangles[keep])
    mesh = mesh.compact()
    logger.debug("Extracted %d triangles at resolution %d", len(mesh.triangles), resolution)
    return mesh


def extract_mesh(
    field: ScalarField, cfg: MeshConfig, workers: int = 1, resolution: Optional[int] = None
) -> TriangleMesh:
    """``marching_cubes`` driven by a ``MeshConfig``."""
    return marching_cubes(
        field,
        cfg.bbox_min,
        cfg.bbox_max,
        resolution or cfg.resolution,
        cfg.slab_size,
        workers,
        cfg.crop_to_unit_sphere,
    )
