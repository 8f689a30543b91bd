"""Functional forms of the tape primitives.

Every function accepts tensors, numpy arrays or Python floats and returns a
``Tensor``; the result is recorded only when an operand lives on a tape.
"""

from collections.abc import Sequence
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from src.autodiff.tape import Operand, Tensor, apply


def exp(a: Operand) -> Tensor:
    return apply("exp", a)


def log(a: Operand) -> Tensor:
    return apply("log", a)


def sqrt(a: Operand) -> Tensor:
    return apply("sqrt", a)


def abs(a: Operand) -> Tensor:  # noqa: A001
    return apply("abs", a)


def sigmoid(a: Operand) -> Tensor:
    return apply("sigmoid", a)


def maximum(a: Operand, b: Operand) -> Tensor:
    """Elementwise max; ties send the gradient to ``a``."""
    return apply("maximum", a, b)


def minimum(a: Operand, b: Operand) -> Tensor:
    """Elementwise min; ties send the gradient to ``a``."""
    return apply("minimum", a, b)


def sum(a: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return apply("sum", a, axis=axis, keepdims=keepdims)


def mean(a: Operand, axis: Optional[int] = None) -> Tensor:
    t = a if isinstance(a, Tensor) else Tensor(a)
    return t.mean(axis=axis)


def concat(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    return apply("concat", *tensors, axis=axis)


def stack(tensors: Sequence[Operand], axis: int = 0) -> Tensor:
    """Stack equally shaped tensors along a new axis."""
    parts = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    shape = parts[0].shape
    axis = axis % (len(shape) + 1)
    new_shape = shape[:axis] + (1,) + shape[axis:]
    return concat([p.reshape(new_shape) for p in parts], axis=axis)


def where(cond: Any, a: Operand, b: Operand) -> Tensor:
    """Select ``a`` where ``cond`` holds, else ``b``. The condition is a constant."""
    return apply("where", a, b, cond=np.asarray(cond, dtype=bool))


def take_along_axis(a: Operand, indices: NDArray[np.intp], axis: int) -> Tensor:
    return apply("take_along_axis", a, indices=np.asarray(indices, dtype=np.intp), axis=axis)


def moveaxis(a: Operand, source: int, destination: int) -> Tensor:
    return apply("moveaxis", a, source=source, destination=destination)


def cumprod_exclusive(a: Operand) -> Tensor:
    """Exclusive running product along the last axis with the total appended."""
    return apply("cumprod_exclusive", a)


def norm(a: Operand, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm along ``axis``."""
    t = a if isinstance(a, Tensor) else Tensor(a)
    return (t * t).sum(axis=axis, keepdims=keepdims).sqrt()
