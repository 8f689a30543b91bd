"""Synthetic dataset generation."""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.typing import NDArray

from src.scene.dataset import SceneDataset
from src.scene.library import get_scene
from src.scene.render import Shading, render_ground_truth
from src.scene.rig import generate_rig
from src.scene.sdf import AnalyticSDF
from src.utils.config import SceneConfig
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

SURFACE_TOLERANCE = 1e-9
NEWTON_STEPS = 50
_BAND = 0.05
_MAX_ROUNDS = 200


def sample_surface_points(scene: AnalyticSDF, n: int, seed: int) -> NDArray[np.float64]:
    """``n`` points on the zero level set of ``scene`` inside ``[-1, 1]^3``.

    Uniform candidates near the surface are pulled onto it with Newton
    steps along the gradient; only points that reach ``|f| < 1e-9`` are kept.

    Raises:
        RejectedInputError: If the scene has no surface in the cube.
    """
    rng = np.random.default_rng(seed)
    kept: list[NDArray[np.float64]] = []
    found = 0
    for _ in range(_MAX_ROUNDS):
        candidates = rng.uniform(-1.0, 1.0, size=(max(4 * n, 1024), 3))
        candidates = candidates[np.abs(scene(candidates)) < _BAND]
        for _ in range(NEWTON_STEPS):
            if candidates.size == 0:
                break
            f = scene(candidates)
            g = scene.gradient(candidates)
            g2 = np.sum(g * g, axis=-1)
            candidates = candidates - (f / np.maximum(g2, 1e-12))[:, None] * g
        if candidates.size:
            on_surface = np.abs(scene(candidates)) < SURFACE_TOLERANCE
            ok = on_surface & np.all(np.abs(candidates) <= 1.0, axis=-1)
            kept.append(candidates[ok])
            found += int(ok.sum())
        if found >= n:
            return np.concatenate(kept)[:n]
    raise RejectedInputError("scene has no reachable surface inside [-1, 1]^3")


def make_scene(cfg: SceneConfig, workers: int = 1) -> SceneDataset:
    """Render every view of the configured scene and sample its surface.

    Views are rendered in a thread pool; results keep view order, so the
    dataset does not depend on ``workers``.
    """
    scene = get_scene(cfg.name)
    cameras = generate_rig(
        cfg.n_views,
        cfg.camera_radius,
        cfg.elevation_range,
        cfg.seed,
        cfg.fov_degrees,
        cfg.resolution,
    )
    shading = Shading(background=cfg.background, texture_seed=cfg.texture_seed)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rendered = list(pool.map(lambda cam: render_ground_truth(scene, cam, shading), cameras))
    images = [image for image, _ in rendered]
    masks = [mask for _, mask in rendered]

    if cfg.name == "empty":
        gt_points = np.zeros((0, 3))
    else:
        gt_points = sample_surface_points(scene, cfg.gt_samples, cfg.seed)
    logger.info("Generated scene '%s': %d views at %dpx", cfg.name, cfg.n_views, cfg.resolution)
    return SceneDataset(cameras=cameras, images=images, gt_points=gt_points, masks=masks)
