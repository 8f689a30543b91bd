"""Built-in synthetic scenes, all inside the unit sphere."""

import logging
from collections.abc import Callable

from src.scene.sdf import (
    AnalyticSDF,
    Box,
    Empty,
    Intersection,
    Plane,
    SmoothUnion,
    Sphere,
    Torus,
    Union,
)
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)


def sphere_scene() -> AnalyticSDF:
    return Sphere(radius=0.5)


def torus_scene() -> AnalyticSDF:
    return Torus(major=0.5, minor=0.2)


def blend_scene() -> AnalyticSDF:
    """Sphere melted into a box, leaving a concave crease."""
    return SmoothUnion(
        Sphere(center=(-0.15, 0.0, 0.0), radius=0.35),
        Box(center=(0.2, 0.0, 0.0), half=(0.25, 0.25, 0.25)),
        k=0.1,
    )


def plane_bump_scene() -> AnalyticSDF:
    """Flat-topped half ball whose top carries a ring of smooth bumps."""
    base = Intersection((Plane(normal=(0.0, 0.0, 1.0), offset=0.0), Sphere(radius=0.75)))
    bumps = Union(
        tuple(
            Sphere(center=(x, y, -0.04), radius=0.14)
            for x, y in ((0.35, 0.0), (-0.175, 0.303), (-0.175, -0.303), (0.0, 0.0))
        )
    )
    return SmoothUnion(base, bumps, k=0.08)


SCENES: dict[str, Callable[[], AnalyticSDF]] = {
    "sphere": sphere_scene,
    "torus": torus_scene,
    "blend": blend_scene,
    "plane-bump": plane_bump_scene,
    "empty": Empty,
}


def get_scene(name: str) -> AnalyticSDF:
    """Build a scene by name.

    Raises:
        RejectedInputError: For an unknown name.
    """
    try:
        factory = SCENES[name]
    except KeyError:
        raise RejectedInputError(f"unknown scene '{name}', choose from {sorted(SCENES)}") from None
    return factory()
