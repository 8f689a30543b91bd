"""Feature maps and differentiable bilinear sampling."""

from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray

from src.autodiff import ops
from src.autodiff.tape import Tensor, constant
from src.utils.errors import RejectedInputError


@dataclass(frozen=True)
class FeatureMap:
    """Per-view feature image, ``data[row, col, channel]``.

    Values are stored as float32, the precision of feature files, and read
    back as float64 by ``texel`` and ``bilinear_sample``.
    """

    data: NDArray[np.float32]

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 3:
            raise RejectedInputError(f"feature map must be (H, W, C), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise RejectedInputError("feature map contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    def texel(self, col: Any, row: Any) -> NDArray[np.float64]:
        """Feature vectors at integer texel positions."""
        rows, cols = np.asarray(row, dtype=np.intp), np.asarray(col, dtype=np.intp)
        return self.data[rows, cols].astype(np.float64)


def bilinear_sample(fmap: FeatureMap, p: Any) -> tuple[Tensor, NDArray[np.bool_]]:
    """Sample ``fmap`` at texel coordinates ``p`` of shape ``(..., 2)`` (x = column, y = row).

    Returns the interpolated features ``(..., C)`` and an ``inside`` mask;
    points outside ``[0, W-1] x [0, H-1]`` are marked ``False`` and get zero
    features with no gradient. Inside the domain the result is differentiable
    with respect to ``p``.
    """
    coords = constant(p)
    xy = coords.value
    w, h = fmap.width, fmap.height
    inside = (xy[..., 0] >= 0) & (xy[..., 0] <= w - 1) & (xy[..., 1] >= 0) & (xy[..., 1] <= h - 1)
    inside &= np.all(np.isfinite(xy), axis=-1)

    safe_xy = np.where(inside[..., None], xy, 0.0)
    x0 = np.clip(np.floor(safe_xy[..., 0]), 0, max(w - 2, 0)).astype(np.intp)
    y0 = np.clip(np.floor(safe_xy[..., 1]), 0, max(h - 2, 0)).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    mask = inside[..., None].astype(np.float64)
    fx = (ops.where(inside, coords[..., 0], 0.0) - x0).reshape(inside.shape + (1,))
    fy = (ops.where(inside, coords[..., 1], 0.0) - y0).reshape(inside.shape + (1,))

    f00 = fmap.data[y0, x0].astype(np.float64) * mask
    f01 = fmap.data[y0, x1].astype(np.float64) * mask
    f10 = fmap.data[y1, x0].astype(np.float64) * mask
    f11 = fmap.data[y1, x1].astype(np.float64) * mask

    top = f00 + (f01 - f00) * fx
    bottom = f10 + (f11 - f10) * fx
    return top + (bottom - top) * fy, inside
