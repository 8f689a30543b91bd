"""Adam over named parameter arrays."""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from src.fields.checkpoint import Checkpoint
from src.utils.errors import CheckpointError, RejectedInputError, TrainingAbortError

logger = logging.getLogger(__name__)

Arrays = dict[str, NDArray[np.float64]]

MOMENT1_PREFIX = "adam.m/"
MOMENT2_PREFIX = "adam.v/"
STEP_KEY = "adam.step"


@dataclass
class OptimState:
    """First and second moment estimates per parameter and the step count."""

    m: Arrays = field(default_factory=dict)
    v: Arrays = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, params: Mapping[str, NDArray[np.float64]]) -> "OptimState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )

    def to_tensors(self) -> Arrays:
        tensors: Arrays = {}
        for name in self.m:
            tensors[MOMENT1_PREFIX + name] = self.m[name]
            tensors[MOMENT2_PREFIX + name] = self.v[name]
        tensors[STEP_KEY] = np.array(float(self.step))
        return tensors

    @classmethod
    def from_checkpoint(
        cls, ckpt: Checkpoint, params: Mapping[str, NDArray[np.float64]]
    ) -> "OptimState":
        """Restore the state stored next to ``params``.

        Raises:
            CheckpointError: If a moment is missing or has the wrong shape.
        """
        m, v = ckpt.group(MOMENT1_PREFIX), ckpt.group(MOMENT2_PREFIX)
        for name, value in params.items():
            for moments in (m, v):
                if name not in moments or moments[name].shape != value.shape:
                    raise CheckpointError(
                        "<checkpoint>", f"optimizer moment for '{name}' missing or misshapen"
                    )
        step = int(ckpt.tensors.get(STEP_KEY, np.array(0.0)))
        return cls(m={k: m[k] for k in params}, v={k: v[k] for k in params}, step=step)


def adam_step(
    params: Mapping[str, NDArray[np.float64]],
    grads: Mapping[str, NDArray[np.float64]],
    state: OptimState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    iteration: Optional[int] = None,
) -> tuple[Arrays, OptimState]:
    """One bias-corrected Adam update; inputs are left untouched.

    Raises:
        RejectedInputError: If parameters, gradients and moments disagree in shape.
        TrainingAbortError: If a gradient is not finite, naming the parameter.
    """
    step = state.step + 1
    new_params: Arrays = {}
    new_state = OptimState(step=step)
    for name, p in params.items():
        g = grads.get(name)
        if g is None or g.shape != p.shape or state.m[name].shape != p.shape:
            raise RejectedInputError(
                f"gradient or moment of '{name}' does not match shape {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            at = state.step if iteration is None else iteration
            logger.error("Non-finite gradient for %s at iteration %d", name, at)
            raise TrainingAbortError(at, name, "non-finite gradient")
        m = beta1 * state.m[name] + (1.0 - beta1) * g
        v = beta2 * state.v[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**step)
        v_hat = v / (1.0 - beta2**step)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_state.m[name] = m
        new_state.v[name] = v
    return new_params, new_state
