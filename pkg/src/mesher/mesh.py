"""Triangle meshes and their OBJ encoding."""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from src.utils.errors import MeshParseError, RejectedInputError

logger = logging.getLogger(__name__)


@dataclass
class TriangleMesh:
    """Vertices ``(V, 3)`` and triangles ``(F, 3)`` of 0-based vertex indices."""

    vertices: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 3)))
    triangles: NDArray[np.intp] = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.intp).reshape(-1, 3)
        tri = self.triangles
        if tri.size and (tri.min() < 0 or tri.max() >= len(self.vertices)):
            raise RejectedInputError("triangle index out of range")

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def areas(self) -> NDArray[np.float64]:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        out: NDArray[np.float64] = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=-1)
        return out

    def without_degenerate(self) -> "TriangleMesh":
        """Drop triangles that repeat a vertex index."""
        t = self.triangles
        keep = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
        return TriangleMesh(self.vertices, t[keep])

    def compact(self) -> "TriangleMesh":
        """Remove vertices no triangle uses, renumbering the rest."""
        used = np.unique(self.triangles)
        remap = np.full(len(self.vertices), -1, dtype=np.intp)
        remap[used] = np.arange(used.size)
        return TriangleMesh(self.vertices[used], remap[self.triangles])


def write_mesh(mesh: TriangleMesh, path: str | Path) -> Path:
    """Write ASCII OBJ with 17 significant digits and 1-based faces."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"v {x:.17g} {y:.17g} {z:.17g}\n" for x, y, z in mesh.vertices]
    lines += [f"f {i + 1} {j + 1} {k + 1}\n" for i, j, k in mesh.triangles]
    target.write_text("".join(lines), encoding="utf-8")
    logger.info(
        "Wrote mesh %s (%d vertices, %d triangles)", target, len(mesh.vertices), len(mesh.triangles)
    )
    return target


def read_mesh(path: str | Path) -> TriangleMesh:
    """Read the ``v`` and ``f`` records of an OBJ file; other records are skipped.

    Face entries may use the ``i/t/n`` form; only the vertex index is kept.

    Raises:
        MeshParseError: With the line number of a malformed record or an
            index outside ``1..V``.
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise MeshParseError(str(source), 0, f"cannot read mesh: {e}") from e

    vertices: list[list[float]] = []
    faces: list[tuple[int, list[int]]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split("#", 1)[0].split()
        if not fields:
            continue
        kind, values = fields[0], fields[1:]
        try:
            if kind == "v":
                if len(values) < 3:
                    raise ValueError("vertex needs 3 coordinates")
                vertices.append([float(v) for v in values[:3]])
            elif kind == "f":
                if len(values) != 3:
                    raise ValueError(f"only triangles are supported, got {len(values)} indices")
                faces.append((number, [int(v.split("/")[0]) for v in values]))
        except ValueError as e:
            raise MeshParseError(str(source), number, str(e)) from e

    triangles = []
    for number, face in faces:
        for index in face:
            if not 1 <= index <= len(vertices):
                raise MeshParseError(
                    str(source), number, f"face index {index} outside 1..{len(vertices)}"
                )
        triangles.append([i - 1 for i in face])
    return TriangleMesh(
        np.array(vertices).reshape(-1, 3), np.array(triangles, dtype=np.intp).reshape(-1, 3)
    )
