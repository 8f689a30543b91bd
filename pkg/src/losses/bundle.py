"""Weighted objective and per-iteration loss record."""

import logging
import math
from collections.abc import Mapping

from pydantic import BaseModel, Field

from src.autodiff.tape import Tensor
from src.utils.errors import TrainingAbortError

logger = logging.getLogger(__name__)

PARTS = ("color", "eikonal", "bias", "feature")


class StageWeights(BaseModel):
    """Weights of the eikonal (alpha), bias (beta) and feature (gamma) terms."""

    alpha: float = Field(default=0.1, ge=0)
    beta: float = Field(default=0.0, ge=0)
    gamma: float = Field(default=0.0, ge=0)

    def of(self, part: str) -> float:
        return {"color": 1.0, "eikonal": self.alpha, "bias": self.beta, "feature": self.gamma}[part]


class LossBundle(BaseModel):
    """Loss parts, their weighted total and the ray counts of one iteration."""

    color: float
    eikonal: float
    bias: float
    feature: float
    total: float
    weights: StageWeights
    n_rays: int = Field(default=0, ge=0)
    n_valid: int = Field(default=0, ge=0)

    @property
    def valid_hit_fraction(self) -> float:
        return self.n_valid / self.n_rays if self.n_rays else 0.0


def weighted_objective(parts: Mapping[str, Tensor], weights: StageWeights) -> Tensor:
    """``color + alpha * eikonal + beta * bias + gamma * feature`` as a graph node.

    Parts with weight 0 are left out of the graph entirely, so a run with
    ``beta = gamma = 0`` performs exactly the arithmetic of the plain
    color-plus-eikonal objective.
    """
    objective = parts["color"]
    for name in PARTS[1:]:
        weight = weights.of(name)
        if weight != 0.0 and name in parts:
            objective = objective + parts[name] * weight
    return objective


def total_loss(
    parts: Mapping[str, float],
    weights: StageWeights,
    iteration: int = 0,
    n_rays: int = 0,
    n_valid: int = 0,
) -> LossBundle:
    """Check every part is finite and assemble the bundle.

    Raises:
        TrainingAbortError: Naming the first non-finite part.

    Example:
        >>> parts = {"color": 1.0, "eikonal": 1.0, "bias": 1.0, "feature": 1.0}
        >>> round(total_loss(parts, StageWeights(alpha=0.1, beta=0.1, gamma=0.5)).total, 12)
        1.7
    """
    values: dict[str, float] = {}
    for name in PARTS:
        value = float(parts.get(name, 0.0))
        if not math.isfinite(value):
            logger.error("Non-finite %s loss at iteration %d", name, iteration)
            raise TrainingAbortError(iteration, name)
        values[name] = value
    total = values["color"]
    for name in PARTS[1:]:
        weight = weights.of(name)
        if weight != 0.0:
            total += values[name] * weight
    return LossBundle(
        **values,
        total=total,
        weights=weights,
        n_rays=n_rays,
        n_valid=n_valid,
    )
