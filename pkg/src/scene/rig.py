"""Camera rigs around the origin."""

import math

import numpy as np

from src.features.camera import Camera
from src.utils.errors import RejectedInputError


def generate_rig(
    n_views: int,
    radius: float,
    elevation_range: tuple[float, float],
    seed: int,
    fov_degrees: float = 40.0,
    resolution: int = 96,
) -> list[Camera]:
    """Cameras at evenly spaced azimuths looking at the origin.

    View ``k`` sits at azimuth ``360 k / n_views`` degrees; its elevation is
    drawn uniformly from ``elevation_range`` (degrees) with ``seed``.

    Raises:
        RejectedInputError: If ``n_views < 2`` or ``radius <= 0``.
    """
    if n_views < 2:
        raise RejectedInputError(f"a rig needs at least 2 views, got {n_views}")
    if radius <= 0:
        raise RejectedInputError(f"rig radius must be positive, got {radius}")
    lo, hi = sorted(elevation_range)
    rng = np.random.default_rng(seed)
    elevations = np.radians(rng.uniform(lo, hi, size=n_views))

    cameras = []
    for k in range(n_views):
        azimuth = 2.0 * math.pi * k / n_views
        el = elevations[k]
        eye = radius * np.array(
            [math.cos(el) * math.cos(azimuth), math.cos(el) * math.sin(azimuth), math.sin(el)]
        )
        cameras.append(Camera.look_at(eye, np.zeros(3), fov_degrees, resolution, resolution))
    return cameras
