"""Rendering whole views from a trained model and image metrics."""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from src.features.camera import Camera
from src.fields.networks import geometry_forward, radiance_forward
from src.renderer.rays import image_rays
from src.renderer.sampling import place_samples
from src.renderer.volume import composite, fill_samples
from src.trainer.model import Arrays, FieldModel
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

_NORMAL_EPS = 1e-12


@dataclass
class RenderedView:
    """Color, depth and normal maps of one camera; ``mask`` marks rays with weight."""

    image: NDArray[np.float64]
    depth: NDArray[np.float64]
    normals: NDArray[np.float64]
    mask: NDArray[np.bool_]


def render_view(model: FieldModel, params: Arrays, camera: Camera) -> RenderedView:
    """Render every pixel of ``camera`` without jitter.

    Depth is the rendered distance along the ray (zero where a ray collects
    no weight); normals are the weight-averaged unit SDF gradients.
    """
    render = model.settings.render
    rays, _ = image_rays(camera, render.bound_radius)
    field = model.sdf_field(params)
    inv_s = model.inv_std(params)

    colors, depths, normals, masks = [], [], [], []
    for start in range(0, len(rays), render.chunk_rays):
        chunk = rays.select(slice(start, start + render.chunk_rays))
        t, _ = place_samples(chunk, field, render)
        points = chunk.origins[:, None, :] + t[..., None] * chunk.directions[:, None, :]
        geo = geometry_forward(model.geometry, params, points)
        dirs = np.broadcast_to(chunk.directions[:, None, :], points.shape)
        rgb = radiance_forward(model.radiance, params, points, dirs, geo.normal, geo.z)
        samples = fill_samples(t, chunk.origins, chunk.directions, geo.sdf, inv_s)
        result = composite(samples, rgb, render.background, render.weight_eps, anchor=render.anchor)

        grad = geo.normal.value[:, :-1, :]
        unit = grad / np.maximum(np.linalg.norm(grad, axis=-1, keepdims=True), _NORMAL_EPS)
        normal = np.sum(samples.weight.value[..., None] * unit, axis=-2)

        colors.append(result.color.value)
        depths.append(np.where(result.has_weight, result.t_rendered.value, 0.0))
        normals.append(normal)
        masks.append(result.has_weight)

    shape = (camera.height, camera.width)
    return RenderedView(
        image=np.concatenate(colors).reshape(shape + (3,)),
        depth=np.concatenate(depths).reshape(shape),
        normals=np.concatenate(normals).reshape(shape + (3,)),
        mask=np.concatenate(masks).reshape(shape),
    )


def psnr(
    pred: NDArray[np.float64],
    truth: NDArray[np.float64],
    mask: Optional[NDArray[np.bool_]] = None,
) -> float:
    """Peak signal-to-noise ratio in dB for images in [0, 1]; ``inf`` for identical images.

    Example:
        >>> round(psnr(np.zeros((2, 2, 3)), np.full((2, 2, 3), 0.1)), 6)
        20.0
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise RejectedInputError(f"image shapes differ: {pred.shape} vs {truth.shape}")
    diff = (pred - truth) ** 2
    if mask is not None:
        selected = np.asarray(mask, dtype=bool)
        if not selected.any():
            raise RejectedInputError("mask selects no pixels")
        diff = diff[selected]
    mse = float(np.mean(diff))
    if mse == 0.0:
        return math.inf
    return -10.0 * math.log10(mse)


def normals_to_image(normals: NDArray[np.float64]) -> NDArray[np.float64]:
    """Map unit normals in [-1, 1] to colors in [0, 1]."""
    return np.clip(0.5 * (normals + 1.0), 0.0, 1.0)


def depth_to_image(depth: NDArray[np.float64], mask: NDArray[np.bool_]) -> NDArray[np.float64]:
    """Gray image with near surfaces bright; background stays black."""
    out = np.zeros(depth.shape)
    if mask.any():
        lo, hi = depth[mask].min(), depth[mask].max()
        out[mask] = 1.0 - (depth[mask] - lo) / max(hi - lo, _NORMAL_EPS)
    return out
