"""Chamfer-L1 evaluation of reconstructed surfaces."""

import logging
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel
from sklearn.neighbors import NearestNeighbors

from src.mesher.mesh import TriangleMesh
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)


class ChamferResult(BaseModel):
    """Mean nearest-neighbour distances between a prediction and the ground truth."""

    accuracy: float
    completeness: float
    chamfer: float

    def csv_row(self) -> str:
        return f"{self.accuracy!r},{self.completeness!r},{self.chamfer!r}"


def nearest_distances(
    queries: NDArray[np.float64], reference: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Distance from each query point to its nearest reference point (kd-tree search)."""
    index = NearestNeighbors(n_neighbors=1, algorithm="kd_tree").fit(reference)
    distances, _ = index.kneighbors(queries)
    out: NDArray[np.float64] = distances[:, 0]
    return out


def _point_set(points: Any, what: str) -> NDArray[np.float64]:
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(p) == 0:
        raise RejectedInputError(f"{what} point set is empty")
    return p


def chamfer_l1(pred: Any, gt: Any) -> ChamferResult:
    """Accuracy (pred to gt), completeness (gt to pred) and their mean.

    Raises:
        RejectedInputError: If either set is empty.
    """
    p = _point_set(pred, "predicted")
    g = _point_set(gt, "ground-truth")
    accuracy = float(nearest_distances(p, g).mean())
    completeness = float(nearest_distances(g, p).mean())
    chamfer = 0.5 * (accuracy + completeness)
    return ChamferResult(accuracy=accuracy, completeness=completeness, chamfer=chamfer)


def sample_surface(mesh: TriangleMesh, n: int, seed: int = 0) -> NDArray[np.float64]:
    """``n`` points distributed uniformly by area over the mesh.

    Raises:
        RejectedInputError: If the mesh has no area.
    """
    areas = mesh.areas() if not mesh.is_empty else np.zeros(0)
    total = float(areas.sum())
    if total <= 0:
        raise RejectedInputError("cannot sample an empty mesh")
    rng = np.random.default_rng(seed)
    faces = rng.choice(len(areas), size=n, p=areas / total)
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    a, b, c = (mesh.vertices[mesh.triangles[faces, k]] for k in range(3))
    out: NDArray[np.float64] = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return out
