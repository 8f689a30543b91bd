"""Training losses and the surface-point finder they share."""

from .bundle import PARTS, LossBundle, StageWeights, total_loss, weighted_objective
from .crossing import SurfaceHit, crossing_index, find_zero_crossing
from .terms import bias_loss, color_loss, eikonal_loss, feature_loss

__all__ = [
    "LossBundle",
    "PARTS",
    "StageWeights",
    "SurfaceHit",
    "bias_loss",
    "color_loss",
    "crossing_index",
    "eikonal_loss",
    "feature_loss",
    "find_zero_crossing",
    "total_loss",
    "weighted_objective",
]
