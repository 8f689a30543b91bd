"""Analytic signed distance functions.

Scenes are small expression trees of primitives and operators. Every node
maps points ``(..., 3)`` to distances ``(...)``, negative inside. Primitive
distances are exact; ``SmoothUnion`` only bounds the distance from below,
which keeps sphere tracing safe.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.utils.errors import RejectedInputError

Array = NDArray[np.float64]

GRADIENT_STEP = 1e-6


def _points(x: Any) -> Array:
    p = np.asarray(x, dtype=np.float64)
    if p.shape[-1:] != (3,):
        raise RejectedInputError(f"points must have a trailing axis of 3, got shape {p.shape}")
    return p


class AnalyticSDF(ABC):
    """Node of an SDF expression tree."""

    @abstractmethod
    def distance(self, p: Array) -> Array:
        """Signed distance at points ``p`` of shape ``(..., 3)``."""
        pass

    def __call__(self, x: Any) -> Array:
        return self.distance(_points(x))

    def gradient(self, x: Any, step: float = GRADIENT_STEP) -> Array:
        """Central-difference gradient ``(..., 3)``."""
        p = _points(x)
        grad = np.empty(p.shape)
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = step
            grad[..., axis] = (self.distance(p + offset) - self.distance(p - offset)) / (2.0 * step)
        return grad


@dataclass(frozen=True)
class Sphere(AnalyticSDF):
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.5

    def distance(self, p: Array) -> Array:
        out: Array = np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius
        return out


@dataclass(frozen=True)
class Box(AnalyticSDF):
    """Axis-aligned box given by its center and half extents."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half: tuple[float, float, float] = (0.25, 0.25, 0.25)

    def distance(self, p: Array) -> Array:
        q = np.abs(p - np.asarray(self.center)) - np.asarray(self.half)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        out: Array = outside + inside
        return out


@dataclass(frozen=True)
class Torus(AnalyticSDF):
    """Ring of major radius ``major`` in the xy-plane around ``center``, tube radius ``minor``."""

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    major: float = 0.5
    minor: float = 0.2

    def distance(self, p: Array) -> Array:
        d = p - np.asarray(self.center)
        ring = np.hypot(d[..., 0], d[..., 1]) - self.major
        out: Array = np.hypot(ring, d[..., 2]) - self.minor
        return out


@dataclass(frozen=True)
class Plane(AnalyticSDF):
    """Half-space ``n . x <= offset``; ``normal`` is normalized on use."""

    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    offset: float = 0.0

    def distance(self, p: Array) -> Array:
        n = np.asarray(self.normal, dtype=np.float64)
        out: Array = p @ (n / np.linalg.norm(n)) - self.offset
        return out


@dataclass(frozen=True)
class Empty(AnalyticSDF):
    """Scene without any surface."""

    def distance(self, p: Array) -> Array:
        return np.full(p.shape[:-1], np.inf)


@dataclass(frozen=True)
class Union(AnalyticSDF):
    children: tuple[AnalyticSDF, ...]

    def distance(self, p: Array) -> Array:
        out: Array = np.min(np.stack([c.distance(p) for c in self.children]), axis=0)
        return out


@dataclass(frozen=True)
class Intersection(AnalyticSDF):
    children: tuple[AnalyticSDF, ...]

    def distance(self, p: Array) -> Array:
        out: Array = np.max(np.stack([c.distance(p) for c in self.children]), axis=0)
        return out


@dataclass(frozen=True)
class SmoothUnion(AnalyticSDF):
    """Polynomial smooth minimum with blend radius ``k``."""

    a: AnalyticSDF
    b: AnalyticSDF
    k: float = 0.1

    def distance(self, p: Array) -> Array:
        da, db = self.a.distance(p), self.b.distance(p)
        h = np.clip(0.5 + 0.5 * (db - da) / self.k, 0.0, 1.0)
        out: Array = db + (da - db) * h - self.k * h * (1.0 - h)
        return out


@dataclass(frozen=True)
class Translate(AnalyticSDF):
    child: AnalyticSDF
    offset: tuple[float, float, float]

    def distance(self, p: Array) -> Array:
        return self.child.distance(p - np.asarray(self.offset))


@dataclass(frozen=True)
class Scale(AnalyticSDF):
    """Uniform scaling about the origin."""

    child: AnalyticSDF
    factor: float

    def __post_init__(self) -> None:
        if self.factor <= 0:
            raise RejectedInputError(f"scale factor must be positive, got {self.factor}")

    def distance(self, p: Array) -> Array:
        return self.child.distance(p / self.factor) * self.factor


def sdf_eval(scene: AnalyticSDF, x: Any) -> Array:
    """Signed distance of ``scene`` at ``x``.

    Example:
        >>> float(sdf_eval(Sphere(radius=1.0), [2.0, 0.0, 0.0]))
        1.0
    """
    return scene(x)
