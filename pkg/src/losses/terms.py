"""Loss terms of the reconstruction objective.

Each term accepts an optional ``normalizer`` so that a batch split into
chunks can share the global divisor: summing the chunk losses then gives
exactly the loss of the whole batch.
"""

import logging
from collections.abc import Callable, Sequence
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from src.autodiff import ops
from src.autodiff.tape import Operand, Tensor, constant
from src.features.camera import MIN_DEPTH, Camera, project_points
from src.features.sampling import FeatureMap, bilinear_sample
from src.losses.crossing import SurfaceHit
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

Field = Callable[[Tensor], Tensor]

_NORM_EPS = 1e-20


def _divisor(normalizer: Optional[float], count: int, what: str) -> float:
    divisor = float(count if normalizer is None else normalizer)
    if divisor <= 0:
        raise RejectedInputError(f"{what} needs a non-empty batch")
    return divisor


def color_loss(rendered: Operand, truth: Any, normalizer: Optional[float] = None) -> Tensor:
    """Mean over pixels of the summed absolute channel difference.

    Example:
        >>> color_loss(np.zeros((1, 3)), np.ones((1, 3))).item()
        3.0
    """
    pred = constant(rendered)
    target = np.asarray(truth, dtype=np.float64)
    if pred.shape != target.shape:
        raise RejectedInputError(f"rendered shape {pred.shape} != truth shape {target.shape}")
    count = pred.shape[0] if pred.ndim else 0
    return (pred - target).abs().sum() / _divisor(normalizer, count, "color loss")


def eikonal_loss(gradients: Operand, normalizer: Optional[float] = None) -> Tensor:
    """Mean of ``(|grad f| - 1)^2`` over gradients ``(..., 3)``."""
    g = constant(gradients)
    count = int(np.prod(g.shape[:-1])) if g.ndim else 0
    divisor = _divisor(normalizer, count, "eikonal loss")
    norm = ((g * g).sum(axis=-1) + _NORM_EPS).sqrt()
    return ((norm - 1.0) ** 2).sum() / divisor


def bias_loss(
    field: Field,
    rendered_points: Operand,
    members: NDArray[np.bool_],
    normalizer: Optional[float] = None,
) -> Tensor:
    """Mean ``|f(x_rendered)|`` over the rays in ``members``; zero when none are.

    ``field`` evaluates the SDF on a tape so the gradient reaches the
    geometry both directly and through ``rendered_points``.
    """
    mask = np.asarray(members, dtype=bool)
    count = int(np.count_nonzero(mask))
    if count == 0:
        return Tensor(0.0)
    points = constant(rendered_points)[mask]
    return field(points).abs().sum() / _divisor(normalizer, count, "bias loss")


def feature_loss(
    hit: SurfaceHit,
    members: NDArray[np.bool_],
    ref_views: NDArray[np.intp],
    pixels: NDArray[np.intp],
    feature_maps: Sequence[FeatureMap],
    cameras: Sequence[Camera],
    source_views: Sequence[Sequence[int]],
    normalizer: Optional[float] = None,
) -> Tensor:
    """Mean multi-view feature distance at the interpolated surface points.

    For each ray in ``members`` the reference feature at its own pixel is
    compared (L1 over channels) with the source features bilinearly sampled
    where ``x_hat`` projects. Projections behind a source camera or outside
    its image are dropped; the per-ray sum is divided by
    ``channels * max(1, sources kept)``.

    Args:
        hit: Surface points of the batch.
        members: Rays that contribute; must all have a valid hit.
        ref_views: Reference view index per ray.
        pixels: ``(column, row)`` pixel per ray in its reference view.
        feature_maps: One map per view, all with the same channel count.
        cameras: One camera per view.
        source_views: Source view indices per reference view.
        normalizer: Divisor replacing the member count.

    Raises:
        RejectedInputError: If a member ray has no valid hit or the maps
            disagree on the channel count.
    """
    mask = np.asarray(members, dtype=bool)
    if np.any(mask & ~hit.valid):
        raise RejectedInputError("feature loss needs a valid surface hit on every member ray")
    count = int(np.count_nonzero(mask))
    if count == 0:
        return Tensor(0.0)
    channels = {fm.channels for fm in feature_maps}
    if len(channels) != 1:
        raise RejectedInputError(f"feature maps disagree on channel count: {sorted(channels)}")
    n_channels = channels.pop()
    divisor = _divisor(normalizer, count, "feature loss")

    total: Optional[Tensor] = None
    for ref in np.unique(ref_views[mask]):
        rows = np.flatnonzero(mask & (ref_views == ref))
        x_hat = hit.x_hat[rows]
        reference = feature_maps[ref].texel(pixels[rows, 0], pixels[rows, 1])
        per_ray: Optional[Tensor] = None
        kept = np.zeros(rows.size)
        for src in source_views[int(ref)]:
            pixel, depth = project_points(cameras[src], x_hat)
            front = depth.value > MIN_DEPTH
            texel = ops.where(front[:, None], pixel - 0.5, -1.0)
            sampled, inside = bilinear_sample(feature_maps[src], texel)
            inside &= front
            kept += inside
            term = (sampled - reference).abs().sum(axis=-1) * inside.astype(np.float64)
            per_ray = term if per_ray is None else per_ray + term
        assert per_ray is not None
        group = (per_ray / (n_channels * np.maximum(kept, 1.0))).sum()
        total = group if total is None else total + group
    assert total is not None
    return total / divisor
