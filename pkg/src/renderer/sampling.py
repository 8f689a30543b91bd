"""Coarse-to-fine sample placement along rays.

Coarse samples are stratified over ``[near, far]``. Fine samples are added
in ``up_sample_steps`` rounds: each round turns the current SDF values into
weights with a fixed inverse standard deviation ``base_inv_s * 2**k``,
draws new distances from the piecewise-constant PDF of those weights and
evaluates the SDF there. Sample placement is not differentiated; only the
final SDF evaluation at the chosen distances is.
"""

import logging
from collections.abc import Callable
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from src.renderer.rays import RayBatch
from src.renderer.volume import RaySamples, fill_samples
from src.utils.config import RenderConfig
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

SdfFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]
Array = NDArray[np.float64]

# A batch whose rays are all shorter than this gets one interval per ray
DEGENERATE_SPAN = 1e-12
_PDF_EPS = 1e-5
_COS_FLOOR = -1e3


def stratified(near: Array, far: Array, n: int, jitter: Optional[Array] = None) -> Array:
    """``t_i = near + (far - near) * (i + u_i) / n`` with ``u_i = 0.5`` unless ``jitter`` is given.

    Example:
        >>> stratified(np.array([0.0]), np.array([1.0]), 4)
        array([[0.125, 0.375, 0.625, 0.875]])
    """
    offsets = np.full(near.shape + (n,), 0.5) if jitter is None else jitter
    if offsets.shape != near.shape + (n,):
        raise RejectedInputError(f"jitter must have shape {near.shape + (n,)}, got {offsets.shape}")
    steps = (np.arange(n) + offsets) / n
    return near[..., None] + (far - near)[..., None] * steps


def sample_pdf(bins: Array, weights: Array, n: int, jitter: Optional[Array] = None) -> Array:
    """Inverse-transform samples of the piecewise-constant PDF given by ``weights`` over ``bins``.

    ``bins`` has ``M + 1`` edges and ``weights`` ``M`` entries per ray. With
    no jitter the samples sit at the uniform quantiles ``(i + 0.5) / n``.
    """
    w = weights + _PDF_EPS
    pdf = w / w.sum(axis=-1, keepdims=True)
    cdf = np.cumsum(pdf, axis=-1)
    cdf = np.concatenate([np.zeros(cdf.shape[:-1] + (1,)), cdf], axis=-1)
    cdf[..., -1] = 1.0

    if jitter is None:
        u = np.broadcast_to((np.arange(n) + 0.5) / n, cdf.shape[:-1] + (n,)).copy()
    else:
        u = (np.arange(n) + jitter) / n

    # searchsorted(side="right") batched over rays
    above = np.sum(u[..., :, None] >= cdf[..., None, :], axis=-1)
    below = np.clip(above - 1, 0, cdf.shape[-1] - 1)
    above = np.clip(above, 0, cdf.shape[-1] - 1)

    cdf_lo = np.take_along_axis(cdf, below, axis=-1)
    cdf_hi = np.take_along_axis(cdf, above, axis=-1)
    bin_lo = np.take_along_axis(bins, below, axis=-1)
    bin_hi = np.take_along_axis(bins, above, axis=-1)
    denom = cdf_hi - cdf_lo
    denom = np.where(denom < _PDF_EPS, 1.0, denom)
    frac = (u - cdf_lo) / denom
    out: Array = bin_lo + frac * (bin_hi - bin_lo)
    return out


def up_sample_weights(
    t: Array, sdf: Array, origins: Array, directions: Array, inv_s: float, bound_radius: float
) -> Array:
    """Interval weights used to place fine samples.

    The SDF slope on each interval is estimated from the neighbouring
    secants (the smaller of the two, clamped to be non-positive) so that
    intervals in front of a surface get the sharp density of a plane. Only
    intervals inside the bounding sphere contribute.
    """
    points = origins[..., None, :] + t[..., None] * directions[..., None, :]
    radius = np.linalg.norm(points, axis=-1)
    inside = (radius[..., :-1] < bound_radius) | (radius[..., 1:] < bound_radius)
    inside = inside.astype(np.float64)

    prev_sdf, next_sdf = sdf[..., :-1], sdf[..., 1:]
    prev_t, next_t = t[..., :-1], t[..., 1:]
    mid_sdf = 0.5 * (prev_sdf + next_sdf)
    cos = (next_sdf - prev_sdf) / (next_t - prev_t + 1e-5)
    shifted = np.concatenate([np.zeros(cos.shape[:-1] + (1,)), cos[..., :-1]], axis=-1)
    cos = np.minimum(shifted, cos)
    cos = np.clip(cos, _COS_FLOOR, 0.0) * inside

    dist = next_t - prev_t
    prev_est = mid_sdf - cos * dist * 0.5
    next_est = mid_sdf + cos * dist * 0.5
    prev_cdf = 1.0 / (1.0 + np.exp(-prev_est * inv_s))
    next_cdf = 1.0 / (1.0 + np.exp(-next_est * inv_s))
    alpha = (prev_cdf - next_cdf + 1e-5) / (prev_cdf + 1e-5)
    ones = np.ones(alpha.shape[:-1] + (1,))
    trans = np.cumprod(np.concatenate([ones, 1.0 - alpha + 1e-7], axis=-1), axis=-1)
    out: Array = alpha * trans[..., :-1]
    return out


def merge_sorted(t: Array, sdf: Array, new_t: Array, new_sdf: Array) -> tuple[Array, Array]:
    """Merge new samples into sorted ones, keeping distances strictly ascending.

    Coincident distances are nudged up to the next representable float.
    """
    all_t = np.concatenate([t, new_t], axis=-1)
    all_sdf = np.concatenate([sdf, new_sdf], axis=-1)
    order = np.argsort(all_t, axis=-1, kind="stable")
    all_t = np.take_along_axis(all_t, order, axis=-1)
    all_sdf = np.take_along_axis(all_sdf, order, axis=-1)
    for i in range(1, all_t.shape[-1]):
        prev = all_t[..., i - 1]
        all_t[..., i] = np.where(all_t[..., i] <= prev, np.nextafter(prev, np.inf), all_t[..., i])
    return all_t, all_sdf


def _fine_counts(n_fine: int, steps: int) -> list[int]:
    if n_fine == 0 or steps == 0:
        return []
    per_step, extra = divmod(n_fine, steps)
    counts = [per_step] * steps
    counts[-1] += extra
    return [c for c in counts if c > 0]


def place_samples(
    rays: RayBatch,
    sdf_fn: SdfFn,
    cfg: RenderConfig,
    coarse_jitter: Optional[Array] = None,
) -> tuple[Array, Array]:
    """Sample distances ``(R, n_coarse + n_fine)`` and the SDF values there.

    When every ray is degenerate (``far - near`` below ``DEGENERATE_SPAN``)
    each ray gets the single interval ``[near, far]`` instead.
    """
    if len(rays) == 0:
        raise RejectedInputError("cannot sample an empty ray batch")
    span = rays.far - rays.near
    if np.all(span < DEGENERATE_SPAN):
        t = np.stack([rays.near, rays.far], axis=-1)
        return t, _evaluate(sdf_fn, rays, t)

    t = stratified(rays.near, rays.far, cfg.n_coarse, coarse_jitter)
    sdf = _evaluate(sdf_fn, rays, t)
    for step, count in enumerate(_fine_counts(cfg.n_fine, cfg.up_sample_steps)):
        inv_s = cfg.base_inv_s * 2.0**step
        weights = up_sample_weights(t, sdf, rays.origins, rays.directions, inv_s, cfg.bound_radius)
        new_t = sample_pdf(t, weights, count)
        new_sdf = _evaluate(sdf_fn, rays, new_t)
        t, sdf = merge_sorted(t, sdf, new_t, new_sdf)
    return t, sdf


def _evaluate(sdf_fn: SdfFn, rays: RayBatch, t: Array) -> Array:
    points = rays.origins[:, None, :] + t[..., None] * rays.directions[:, None, :]
    return np.asarray(sdf_fn(points), dtype=np.float64).reshape(t.shape)


def sample_hierarchical(
    rays: RayBatch,
    sdf_fn: SdfFn,
    cfg: RenderConfig,
    inv_s: float,
    coarse_jitter: Optional[Array] = None,
) -> RaySamples:
    """Coarse-plus-fine samples with SDF, opacity and weights filled using ``inv_s``.

    Args:
        rays: Batch of rays.
        sdf_fn: Maps points ``(..., 3)`` to SDF values ``(...)``.
        cfg: Sample counts, upsampling rounds and bounding radius.
        inv_s: The trained sharpness used for the final weights.
        coarse_jitter: Stratification offsets ``(R, n_coarse)`` in [0, 1);
            midpoints when omitted.
    """
    t, sdf = place_samples(rays, sdf_fn, cfg, coarse_jitter)
    return fill_samples(t, rays.origins, rays.directions, sdf, inv_s)
