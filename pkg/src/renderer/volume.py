"""SDF-to-opacity conversion and volume compositing.

Opacity between consecutive samples uses the ratio of logistic CDFs
``alpha_i = max((Phi_s(f_i) - Phi_s(f_{i+1})) / Phi_s(f_i), 0)``, evaluated
in log space as ``-expm1(log Phi_s(f_{i+1}) - log Phi_s(f_i))`` so that
rays far outside or inside the surface stay finite.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from src.autodiff import ops
from src.autodiff.tape import Operand, Tensor, constant
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

SHARPNESS_PARAM = "sharpness.v"
ANCHORS = ("left", "midpoint")


@dataclass(frozen=True)
class SharpnessParam:
    """Trainable inverse standard deviation ``s = exp(scale * v)``.

    Storing the log-parameter ``v`` keeps ``s > 0`` for every value the
    optimizer can reach; ``scale`` speeds up its updates.
    """

    scale: float = 10.0
    name: str = SHARPNESS_PARAM

    def initial(self, init_std: float) -> NDArray[np.float64]:
        """Parameter value giving ``s = 1 / init_std``."""
        if init_std <= 0:
            raise RejectedInputError(f"initial standard deviation must be positive, got {init_std}")
        return np.array([math.log(1.0 / init_std) / self.scale])

    def inv_std(self, v: Operand) -> Tensor:
        """``s`` as a tensor, differentiable in ``v`` when it is recorded."""
        return (constant(v) * self.scale).exp().reshape(())

    def value(self, v: Any) -> float:
        return float(math.exp(self.scale * float(np.asarray(v, dtype=np.float64).reshape(-1)[0])))


def log_sigmoid(x: Tensor) -> Tensor:
    """``log(1 / (1 + exp(-x)))`` without overflow."""
    return -((-x).softplus())


def alphas_and_weights(sdf: Operand, t: Any, s: Operand) -> tuple[Tensor, Tensor, Tensor]:
    """Per-interval opacity, weights and residual transmittance.

    Args:
        sdf: SDF values ``(..., N)`` at the samples, ``N >= 2``.
        t: Sample distances ``(..., N)``, strictly ascending.
        s: Inverse standard deviation (scalar).

    Returns:
        ``alpha`` and ``weight`` of shape ``(..., N - 1)`` and the residual
        ``(...)``; ``weight.sum(-1) + residual == 1``.

    Raises:
        RejectedInputError: On mismatched shapes, fewer than two samples or
            non-ascending ``t``.

    Example:
        >>> alpha, weight, residual = alphas_and_weights([1.0, -1.0], [0.0, 1.0], 1.0)
        >>> round(alpha.item(), 6)
        0.632121
    """
    f = constant(sdf)
    dist = np.asarray(t.value if isinstance(t, Tensor) else t, dtype=np.float64)
    if f.shape != dist.shape:
        raise RejectedInputError(f"sdf shape {f.shape} != t shape {dist.shape}")
    if f.ndim == 0 or f.shape[-1] < 2:
        raise RejectedInputError("need at least two samples per ray")
    if not np.all(np.diff(dist, axis=-1) > 0):
        raise RejectedInputError("sample distances must be strictly ascending")

    log_cdf = log_sigmoid(f * constant(s))
    ratio = log_cdf[..., 1:] - log_cdf[..., :-1]
    alpha = ops.maximum(-(ratio.expm1()), 0.0)
    transmittance = ops.cumprod_exclusive(1.0 - alpha)
    weight = alpha * transmittance[..., :-1]
    residual = transmittance[..., -1]
    return alpha, weight, residual


@dataclass
class RaySamples:
    """Samples along a batch of rays.

    Per-sample arrays have shape ``(..., N)``, per-interval ones ``(..., N - 1)``.
    """

    t: NDArray[np.float64]
    origins: NDArray[np.float64]
    directions: NDArray[np.float64]
    sdf: Tensor
    alpha: Tensor
    weight: Tensor
    residual: Tensor

    @property
    def n_samples(self) -> int:
        return int(self.t.shape[-1])

    def points(self) -> NDArray[np.float64]:
        """Sample positions ``(..., N, 3)``."""
        return self.origins[..., None, :] + self.t[..., None] * self.directions[..., None, :]

    def select(self, index: Any) -> "RaySamples":
        return RaySamples(
            t=self.t[index],
            origins=self.origins[index],
            directions=self.directions[index],
            sdf=self.sdf[index],
            alpha=self.alpha[index],
            weight=self.weight[index],
            residual=self.residual[index],
        )


def fill_samples(
    t: NDArray[np.float64],
    origins: NDArray[np.float64],
    directions: NDArray[np.float64],
    sdf: Operand,
    s: Operand,
) -> RaySamples:
    """Complete ``RaySamples`` from sample distances and SDF values."""
    alpha, weight, residual = alphas_and_weights(sdf, t, s)
    return RaySamples(t, origins, directions, constant(sdf), alpha, weight, residual)


@dataclass
class Composite:
    """Composited ray outputs."""

    color: Tensor
    t_rendered: Tensor
    x_rendered: Tensor
    weight_sum: Tensor
    has_weight: NDArray[np.bool_]


def composite(
    samples: RaySamples,
    colors: Operand,
    background: Any = (0.0, 0.0, 0.0),
    weight_eps: float = 1e-4,
    t: Optional[Operand] = None,
    anchor: str = "left",
) -> Composite:
    """Accumulate colors and the rendered distance along each ray.

    Interval ``i`` takes the color of its left sample. ``t_rendered`` is the
    weight-normalized mean of the interval anchors. Left anchors (the default)
    put it about half a sample spacing in front of the root of a linear SDF;
    midpoint anchors remove that offset. On rays whose total weight is at
    most ``weight_eps`` it is meaningless and ``has_weight`` is false. ``t``
    may pass the sample distances as a tensor so that the rendered point also
    differentiates through them.

    Args:
        samples: Filled samples with ``N`` entries per ray.
        colors: Per-sample ``(..., N, 3)`` or per-interval ``(..., N - 1, 3)`` colors.
        background: Color behind the last sample.
        weight_eps: Minimum total weight for a ray to count as hitting a surface.
        t: Optional override of ``samples.t``.
        anchor: ``"left"`` or ``"midpoint"`` distance of each interval.
    """
    if anchor not in ANCHORS:
        raise RejectedInputError(f"anchor must be one of {ANCHORS}, got {anchor!r}")
    c = constant(colors)
    intervals = samples.n_samples - 1
    if c.shape[-2] == samples.n_samples:
        c = c[..., :-1, :]
    elif c.shape[-2] != intervals:
        raise RejectedInputError(
            f"expected {intervals} or {samples.n_samples} colors per ray, got {c.shape[-2]}"
        )

    weight = samples.weight
    w = weight.reshape(weight.shape + (1,))
    bg = np.asarray(background, dtype=np.float64)
    residual = samples.residual.reshape(samples.residual.shape + (1,))
    color = (w * c).sum(axis=-2) + residual * bg

    dist = constant(samples.t if t is None else t)
    if anchor == "midpoint":
        dist = (dist[..., :-1] + dist[..., 1:]) * 0.5
    else:
        dist = dist[..., :-1]
    weight_sum = weight.sum(axis=-1)
    has_weight = weight_sum.value > weight_eps
    denominator = ops.where(has_weight, weight_sum, 1.0)
    t_rendered = (weight * dist).sum(axis=-1) / denominator
    x_rendered = samples.origins + t_rendered.reshape(t_rendered.shape + (1,)) * samples.directions
    return Composite(color, t_rendered, x_rendered, weight_sum, has_weight)
