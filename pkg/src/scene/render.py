"""Sphere-traced reference images of analytic scenes."""

import logging
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from src.features.camera import Camera
from src.renderer.rays import RayBatch, image_rays
from src.scene.sdf import AnalyticSDF

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

MAX_STEPS = 256
HIT_EPS = 1e-5
SCENE_RADIUS = 1.0


class Shading(BaseModel):
    """Lighting and texture used for ground-truth images."""

    model_config = ConfigDict(frozen=True)

    light_dir: tuple[float, float, float] = Field(default=(0.4, -0.3, 0.87))
    ambient: float = Field(default=0.25, ge=0)
    diffuse: float = Field(default=0.75, ge=0)
    specular: float = Field(default=0.2, ge=0)
    shininess: float = Field(default=32.0, gt=0)
    background: tuple[float, float, float] = Field(default=(0.0, 0.0, 0.0))
    texture_seed: int = Field(default=7)
    texture_cells: tuple[int, int] = Field(default=(6, 17))


class ValueNoise:
    """Seeded 3D value noise on ``[-1, 1]^3``, two octaves, three channels."""

    def __init__(self, seed: int, cells: tuple[int, int] = (6, 17)) -> None:
        rng = np.random.default_rng(seed)
        self.lattices = [rng.random((3, n + 1, n + 1, n + 1)) for n in cells]

    def __call__(self, p: Array) -> Array:
        flat = p.reshape(-1, 3)
        total = np.zeros((flat.shape[0], 3))
        amplitude, norm = 1.0, 0.0
        for lattice in self.lattices:
            n = lattice.shape[-1] - 1
            coords = (np.clip(flat, -1.0, 1.0) + 1.0) * 0.5 * n
            for c in range(3):
                sampled = ndimage.map_coordinates(lattice[c], coords.T, order=1, mode="nearest")
                total[:, c] += amplitude * sampled
            norm += amplitude
            amplitude *= 0.5
        out: Array = (total / norm).reshape(p.shape)
        return out


def sphere_trace(scene: AnalyticSDF, rays: RayBatch) -> tuple[Array, NDArray[np.bool_]]:
    """March every ray from ``near`` by the SDF value; returns distances and the hit mask."""
    t = rays.near.copy()
    hit = np.zeros(len(rays), dtype=bool)
    active = np.ones(len(rays), dtype=bool)
    for _ in range(MAX_STEPS):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        d = scene(rays.origins[idx] + t[idx, None] * rays.directions[idx])
        close = d < HIT_EPS
        hit[idx[close]] = True
        t[idx[~close]] += d[~close]
        active[idx[close]] = False
        active[idx[~close]] = t[idx[~close]] <= rays.far[idx[~close]]
    return t, hit


def shade(
    scene: AnalyticSDF, points: Array, view_dirs: Array, shading: Shading, noise: ValueNoise
) -> Array:
    """Textured Lambert plus Blinn-Phong color of surface points ``(K, 3)``."""
    normal = scene.gradient(points)
    normal /= np.maximum(np.linalg.norm(normal, axis=-1, keepdims=True), 1e-12)
    light = np.asarray(shading.light_dir, dtype=np.float64)
    light /= np.linalg.norm(light)
    half = light - view_dirs
    half /= np.maximum(np.linalg.norm(half, axis=-1, keepdims=True), 1e-12)

    albedo = 0.2 + 0.7 * noise(points)
    lambert = np.maximum(normal @ light, 0.0)[:, None]
    highlight = np.maximum(np.sum(normal * half, axis=-1), 0.0)[:, None] ** shading.shininess
    color = albedo * (shading.ambient + shading.diffuse * lambert) + shading.specular * highlight
    out: Array = np.clip(color, 0.0, 1.0)
    return out


def render_ground_truth(
    scene: AnalyticSDF, camera: Camera, shading: Any = None
) -> tuple[Array, NDArray[np.bool_]]:
    """Image ``(H, W, 3)`` in [0, 1] and hit mask ``(H, W)`` of one view."""
    shading = shading or Shading()
    rays, _ = image_rays(camera, SCENE_RADIUS)
    t, hit = sphere_trace(scene, rays)

    image = np.broadcast_to(np.asarray(shading.background, dtype=np.float64), (len(rays), 3)).copy()
    if np.any(hit):
        points = rays.origins[hit] + t[hit, None] * rays.directions[hit]
        noise = ValueNoise(shading.texture_seed, shading.texture_cells)
        image[hit] = shade(scene, points, rays.directions[hit], shading, noise)
    shape = (camera.height, camera.width)
    logger.debug("Rendered %dx%d view, %d hit pixels", camera.width, camera.height, int(hit.sum()))
    return image.reshape(shape + (3,)), hit.reshape(shape)
