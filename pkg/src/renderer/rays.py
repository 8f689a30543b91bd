"""Camera rays and their bounding-sphere intervals."""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.features.camera import Camera, pixel_directions
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-9
# Span given to rays that miss the bounding sphere, relative to its radius
MISS_SPAN = 1e-6


@dataclass(frozen=True)
class Ray:
    """One ray ``o + t v`` restricted to ``[near, far]``."""

    o: NDArray[np.float64]
    v: NDArray[np.float64]
    near: float
    far: float

    def __post_init__(self) -> None:
        if abs(float(np.linalg.norm(self.v)) - 1.0) > UNIT_TOLERANCE:
            raise RejectedInputError(
                f"ray direction must be unit length, got |v| = {np.linalg.norm(self.v)}"
            )
        if not self.near < self.far:
            raise RejectedInputError(f"need near < far, got near={self.near}, far={self.far}")

    def at(self, t: Any) -> NDArray[np.float64]:
        return self.o + np.asarray(t, dtype=np.float64)[..., None] * self.v

    def as_batch(self) -> "RayBatch":
        return RayBatch(
            origins=self.o[None, :],
            directions=self.v[None, :],
            near=np.array([self.near]),
            far=np.array([self.far]),
        )


@dataclass(frozen=True)
class RayBatch:
    """``R`` rays stored as arrays: origins and directions ``(R, 3)``, near and far ``(R,)``."""

    origins: NDArray[np.float64]
    directions: NDArray[np.float64]
    near: NDArray[np.float64]
    far: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = self.origins.shape[0]
        if self.origins.shape != (n, 3) or self.directions.shape != (n, 3):
            raise RejectedInputError("ray origins and directions must both be (R, 3)")
        if self.near.shape != (n,) or self.far.shape != (n,):
            raise RejectedInputError("ray near and far must be (R,)")
        lengths = np.linalg.norm(self.directions, axis=-1)
        if n and np.max(np.abs(lengths - 1.0)) > UNIT_TOLERANCE:
            raise RejectedInputError("ray directions must be unit length")
        if n and not np.all(self.near < self.far):
            raise RejectedInputError("every ray needs near < far")

    def __len__(self) -> int:
        return int(self.origins.shape[0])

    def ray(self, index: int) -> Ray:
        return Ray(
            self.origins[index],
            self.directions[index],
            float(self.near[index]),
            float(self.far[index]),
        )

    def select(self, index: Any) -> "RayBatch":
        """Sub-batch of the rays picked by ``index`` (slice, mask or index array)."""
        return RayBatch(
            origins=self.origins[index],
            directions=self.directions[index],
            near=self.near[index],
            far=self.far[index],
        )

    @classmethod
    def concatenate(cls, batches: list["RayBatch"]) -> "RayBatch":
        return cls(
            origins=np.concatenate([b.origins for b in batches]),
            directions=np.concatenate([b.directions for b in batches]),
            near=np.concatenate([b.near for b in batches]),
            far=np.concatenate([b.far for b in batches]),
        )


def sphere_near_far(
    origins: NDArray[np.float64], directions: NDArray[np.float64], radius: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Entry and exit distances of rays through the origin-centered sphere.

    Rays starting inside the sphere get ``near = 0``. Rays that miss the
    sphere (or whose segment lies behind the origin) get a tiny interval at
    their closest approach so every ray still satisfies ``near < far``.
    """
    b = np.sum(origins * directions, axis=-1)
    c = np.sum(origins * origins, axis=-1) - radius * radius
    disc = b * b - c
    half = np.sqrt(np.maximum(disc, 0.0))
    near = np.maximum(-b - half, 0.0)
    far = -b + half
    span = MISS_SPAN * radius
    miss = (disc <= 0.0) | (far <= near + span)
    closest = np.maximum(-b, 0.0)
    near = np.where(miss, closest, near)
    far = np.where(miss, closest + span, far)
    return near, far


def camera_rays(camera: Camera, pixels: Any, bound_radius: float) -> RayBatch:
    """Rays through the centers of integer pixels ``(R, 2)`` given as (column, row).

    Raises:
        RejectedInputError: If a pixel lies outside the image.
    """
    px = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
    directions = pixel_directions(camera, px)
    origins = np.broadcast_to(camera.center, directions.shape).copy()
    near, far = sphere_near_far(origins, directions, bound_radius)
    return RayBatch(origins=origins, directions=directions, near=near, far=far)


def pixel_ray(camera: Camera, px: Any, bound_radius: float = 1.0) -> Ray:
    """The ray through the center of pixel ``px = (column, row)``, bounded by the scene sphere."""
    return camera_rays(camera, [px], bound_radius).ray(0)


def image_rays(camera: Camera, bound_radius: float) -> tuple[RayBatch, NDArray[np.intp]]:
    """Rays for every pixel in row-major order, with their ``(column, row)`` indices."""
    rows, cols = np.meshgrid(np.arange(camera.height), np.arange(camera.width), indexing="ij")
    pixels = np.stack([cols.ravel(), rows.ravel()], axis=-1)
    return camera_rays(camera, pixels, bound_radius), pixels
