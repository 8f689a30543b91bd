"""Pinhole cameras and differentiable projection.

Image coordinates put the center of pixel ``(i, j)`` (column, row) at
``(i + 0.5, j + 0.5)``. Feature maps are addressed in texel coordinates,
where texel ``(i, j)`` sits exactly at ``(i, j)``; ``texel = image - 0.5``.
"""

from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.autodiff import ops
from src.autodiff.tape import Tensor, constant
from src.utils.errors import BehindCameraError, RejectedInputError

MIN_DEPTH = 1e-9
ORTHO_TOLERANCE = 1e-9


class Camera(BaseModel):
    """Intrinsics ``K`` and world-to-camera extrinsics ``(R, t)`` of one view."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: NDArray[np.float64] = Field(..., description="3x3 intrinsics in pixels")
    R: NDArray[np.float64] = Field(..., description="3x3 world-to-camera rotation")
    t: NDArray[np.float64] = Field(..., description="World-to-camera translation")
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)

    @field_validator("K", "R", "t", mode="before")
    @classmethod
    def _as_float_array(cls, v: Any) -> NDArray[np.float64]:
        return np.asarray(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_invariants(self) -> "Camera":
        if self.K.shape != (3, 3) or self.R.shape != (3, 3) or self.t.shape != (3,):
            raise ValueError("camera needs K 3x3, R 3x3 and t of length 3")
        if not np.allclose(self.R @ self.R.T, np.eye(3), atol=ORTHO_TOLERANCE, rtol=0.0):
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) > ORTHO_TOLERANCE:
            raise ValueError("R must have determinant +1")
        if np.any(np.tril(self.K, -1) != 0.0) or self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise ValueError("K must be upper-triangular with positive focal lengths")
        return self

    @property
    def center(self) -> NDArray[np.float64]:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    @property
    def optical_axis(self) -> NDArray[np.float64]:
        """Viewing direction (camera +z) in world coordinates."""
        return self.R[2].copy()

    @classmethod
    def look_at(
        cls,
        eye: Any,
        target: Any,
        fov_degrees: float,
        width: int,
        height: int,
        up: Any = (0.0, 0.0, 1.0),
    ) -> "Camera":
        """Camera at ``eye`` looking at ``target``; image y points down."""
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        focal = 0.5 * width / np.tan(0.5 * np.radians(fov_degrees))
        K = np.array([[focal, 0.0, 0.5 * width], [0.0, focal, 0.5 * height], [0.0, 0.0, 1.0]])
        return cls(K=K, R=R, t=-R @ eye, width=width, height=height)


def project_points(camera: Camera, x: Any) -> tuple[Tensor, Tensor]:
    """Image coordinates ``(..., 2)`` and depths ``(...)`` of points ``(..., 3)``.

    No depth check is made; points at or behind the camera yield meaningless
    coordinates and must be masked by the caller using the returned depth.
    """
    point = constant(x)
    q = (point @ camera.R.T + camera.t) @ camera.K.T
    depth = q[..., 2]
    safe = ops.where(depth.value > MIN_DEPTH, depth, 1.0)
    pixel = q[..., :2] / safe.reshape(safe.shape + (1,))
    return pixel, depth


def project(camera: Camera, x: Any) -> tuple[Tensor, Tensor]:
    """Project points, rejecting any at depth <= 1e-9.

    Raises:
        BehindCameraError: If a point lies at or behind the camera plane.

    Example:
        >>> cam = Camera(K=np.eye(3), R=np.eye(3), t=np.zeros(3), width=4, height=4)
        >>> project(cam, [0.0, 0.0, 1.0])[0].value
        array([0., 0.])
    """
    pixel, depth = project_points(camera, x)
    if np.any(depth.value <= MIN_DEPTH):
        raise BehindCameraError("point projects with non-positive depth")
    return pixel, depth


def pixel_directions(camera: Camera, pixels: Any) -> NDArray[np.float64]:
    """Unit world directions through the centers of pixels ``(..., 2)`` (column, row).

    Raises:
        RejectedInputError: If a pixel lies outside the image.
    """
    px = np.asarray(pixels, dtype=np.float64)
    cols, rows = px[..., 0], px[..., 1]
    if np.any((cols < 0) | (cols >= camera.width) | (rows < 0) | (rows >= camera.height)):
        raise RejectedInputError(f"pixel outside {camera.width}x{camera.height} image")
    homogeneous = np.stack([cols + 0.5, rows + 0.5, np.ones_like(cols)], axis=-1)
    d_cam = homogeneous @ np.linalg.inv(camera.K).T
    d_world = d_cam @ camera.R
    return d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)
