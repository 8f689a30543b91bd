"""First SDF zero crossing along sampled rays."""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from src.autodiff import ops
from src.autodiff.tape import Operand, Tensor, constant
from src.renderer.volume import RaySamples


@dataclass
class SurfaceHit:
    """Interpolated surface point per ray.

    ``index`` is the sample just before the crossing; on rays where
    ``valid`` is false ``index``, ``t_hat`` and ``x_hat`` are placeholders.
    """

    valid: NDArray[np.bool_]
    index: NDArray[np.intp]
    t_hat: Tensor
    x_hat: Tensor

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.valid))


def crossing_index(sdf: NDArray[np.float64]) -> tuple[NDArray[np.bool_], NDArray[np.intp]]:
    """Validity and index of the first sample pair going from ``f >= 0`` to ``f < 0``."""
    cond = (sdf[..., :-1] >= 0.0) & (sdf[..., 1:] < 0.0)
    return cond.any(axis=-1), np.argmax(cond, axis=-1).astype(np.intp)


def _pick(values: Tensor, index: NDArray[np.intp]) -> Tensor:
    return ops.take_along_axis(values, index[..., None], axis=-1)[..., 0]


def find_zero_crossing(
    samples: RaySamples, sdf: Optional[Operand] = None, t: Optional[Any] = None
) -> SurfaceHit:
    """Linearly interpolated first entry into the surface on every ray.

    Only the first crossing from outside to inside counts; leading negative
    samples (a ray starting inside) are skipped. A sample with ``f = 0``
    followed by a negative one is itself the crossing. The result is
    differentiable in both bracketing SDF values and, when ``t`` is given
    as a tensor, in the sample distances.

    Example:
        >>> from src.renderer.volume import fill_samples
        >>> z_axis = np.array([0.0, 0.0, 1.0])
        >>> s = fill_samples(np.array([1.0, 1.5]), np.zeros(3), z_axis, [0.2, -0.3], 1.0)
        >>> round(find_zero_crossing(s).t_hat.item(), 12)
        1.2
    """
    f = constant(samples.sdf if sdf is None else sdf)
    dist = constant(samples.t if t is None else t)
    valid, index = crossing_index(f.value)

    f_s = ops.where(valid, _pick(f, index), 1.0)
    f_n = ops.where(valid, _pick(f, index + 1), -1.0)
    t_s = _pick(dist, index)
    t_n = _pick(dist, index + 1)

    t_hat = (f_s * t_n - f_n * t_s) / (f_s - f_n)
    # Rounding may leave the bracket by an ulp
    t_hat = ops.minimum(ops.maximum(t_hat, t_s), t_n)
    x_hat = samples.origins + t_hat.reshape(t_hat.shape + (1,)) * samples.directions
    return SurfaceHit(valid=valid, index=index, t_hat=t_hat, x_hat=x_hat)
