"""Reverse-mode automatic differentiation with forward-over-reverse nesting."""

from .dual import Dual, concat, seed_dual, spatial_gradient, value_and_spatial_gradient
from .primitives import PRIMITIVES, Primitive, register
from .tape import Adjoints, Node, Tape, Tensor, apply, constant, is_recorded

__all__ = [
    "Adjoints",
    "Dual",
    "Node",
    "PRIMITIVES",
    "Primitive",
    "Tape",
    "Tensor",
    "apply",
    "concat",
    "constant",
    "is_recorded",
    "register",
    "seed_dual",
    "spatial_gradient",
    "value_and_spatial_gradient",
]
