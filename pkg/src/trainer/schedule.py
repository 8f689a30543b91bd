"""Learning-rate schedule and staged loss weights."""

import math

from pydantic import BaseModel

from src.losses.bundle import StageWeights
from src.utils.config import TrainConfig
from src.utils.errors import RejectedInputError


class WarmupCosine:
    """Linear warm-up from 0 to ``lr_max``, then cosine decay to ``lr_min`` at the last iteration.

    Example:
        >>> sched = WarmupCosine(lr_max=1.0, lr_min=0.1, warmup=10, total=110)
        >>> sched(0), round(sched(10), 12), round(sched(109), 12)
        (0.0, 1.0, 0.1)
    """

    def __init__(self, lr_max: float, lr_min: float, warmup: int, total: int) -> None:
        self.lr_max = lr_max
        self.lr_min = lr_min
        self.warmup = warmup
        self.total = total

    def __call__(self, iteration: int) -> float:
        if not 0 <= iteration < self.total:
            raise RejectedInputError(f"iteration {iteration} outside [0, {self.total})")
        if iteration < self.warmup:
            return self.lr_max * iteration / self.warmup
        progress = (iteration - self.warmup) / max(1, self.total - 1 - self.warmup)
        cosine = 0.5 * (1.0 + math.cos(math.pi * progress))
        return self.lr_min + (self.lr_max - self.lr_min) * cosine


class ScheduleStep(BaseModel):
    """Learning rate, stage and loss weights of one iteration."""

    lr: float
    stage: int
    weights: StageWeights


def stage_of(iteration: int, boundaries: tuple[int, int]) -> int:
    first, second = boundaries
    if iteration < first:
        return 0
    return 1 if iteration < second else 2


def mode_weights(mode: str, beta: float, gamma: float) -> tuple[float, float]:
    """Zero the bias and/or feature weight for the ablation modes."""
    if mode == "baseline":
        return 0.0, 0.0
    if mode == "bias":
        return beta, 0.0
    if mode == "feature":
        return 0.0, gamma
    return beta, gamma


def lr_and_weights(iteration: int, cfg: TrainConfig) -> ScheduleStep:
    """Schedule values at ``iteration``.

    Raises:
        RejectedInputError: If ``iteration`` is outside ``[0, total_iters)``.
    """
    lr = WarmupCosine(cfg.lr_max, cfg.lr_min, cfg.warmup_iters, cfg.total_iters)(iteration)
    stage = stage_of(iteration, cfg.boundaries())
    beta, gamma = mode_weights(cfg.mode, *cfg.stage_weights[stage])
    weights = StageWeights(alpha=cfg.eikonal_weight, beta=beta, gamma=gamma)
    return ScheduleStep(lr=lr, stage=stage, weights=weights)
