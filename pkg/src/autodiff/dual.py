"""Forward-over-reverse nesting.

A ``Dual`` carries a primal tensor and a tangent tensor with one leading slot
per spatial axis: for a primal of shape ``S`` the tangent has shape
``(3,) + S`` and slot ``k`` holds the derivative along input axis ``k``. Both
parts are ordinary tape tensors, so a gradient produced here is itself a set
of graph nodes and can be differentiated again by ``Tape.backward``.

A tangent of ``None`` means an identically zero tangent.
"""

from collections.abc import Callable, Sequence
from typing import Any, Optional, Union

import numpy as np

from src.autodiff import ops
from src.autodiff.tape import Operand, Tensor, constant

N_AXES = 3

Value = Union["Dual", Tensor]


def _lift(tangent: Optional[Tensor], ndim: int) -> Optional[Tensor]:
    """Insert singleton axes after the slot axis so the tangent has ``ndim + 1`` dims."""
    if tangent is None or tangent.ndim == ndim + 1:
        return tangent
    missing = ndim + 1 - tangent.ndim
    return tangent.reshape((tangent.shape[0],) + (1,) * missing + tangent.shape[1:])


def _add_tangents(a: Optional[Tensor], b: Optional[Tensor]) -> Optional[Tensor]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _scale(tangent: Optional[Tensor], factor: Operand) -> Optional[Tensor]:
    return None if tangent is None else tangent * factor


class Dual:
    """Primal value with its spatial derivatives."""

    __slots__ = ("primal", "tangent")
    __array_priority__ = 1001
    __array_ufunc__ = None

    def __init__(self, primal: Operand, tangent: Optional[Tensor] = None) -> None:
        self.primal: Tensor = constant(primal)
        self.tangent = tangent

    def __repr__(self) -> str:
        return f"Dual(shape={self.primal.shape})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.primal.shape

    @property
    def ndim(self) -> int:
        return self.primal.ndim

    def full_tangent(self) -> Optional[Tensor]:
        """Tangent broadcast to ``(3,) + shape``."""
        shape = (N_AXES,) + self.shape
        if self.tangent is None or self.tangent.shape == shape:
            return self.tangent
        lifted = _lift(self.tangent, self.ndim)
        assert lifted is not None
        return lifted.broadcast_to(shape)

    @staticmethod
    def lift(value: Any) -> "Dual":
        return value if isinstance(value, Dual) else Dual(value)

    def _binary_parts(self, other: Any) -> tuple["Dual", Optional[Tensor], Optional[Tensor], int]:
        o = Dual.lift(other)
        ndim = max(self.ndim, o.ndim)
        return o, _lift(self.tangent, ndim), _lift(o.tangent, ndim), ndim

    # arithmetic
    def __add__(self, other: Any) -> "Dual":
        o, ta, tb, _ = self._binary_parts(other)
        return Dual(self.primal + o.primal, _add_tangents(ta, tb))

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Dual":
        o, ta, tb, _ = self._binary_parts(other)
        return Dual(self.primal - o.primal, _add_tangents(ta, None if tb is None else -tb))

    def __rsub__(self, other: Any) -> "Dual":
        return Dual.lift(other) - self

    def __mul__(self, other: Any) -> "Dual":
        o, ta, tb, _ = self._binary_parts(other)
        tangent = _add_tangents(_scale(ta, o.primal), _scale(tb, self.primal))
        return Dual(self.primal * o.primal, tangent)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "Dual":
        o, ta, tb, _ = self._binary_parts(other)
        out = self.primal / o.primal
        tangent = _add_tangents(
            None if ta is None else ta / o.primal,
            None if tb is None else -tb * out / o.primal,
        )
        return Dual(out, tangent)

    def __rtruediv__(self, other: Any) -> "Dual":
        return Dual.lift(other) / self

    def __neg__(self) -> "Dual":
        return Dual(-self.primal, None if self.tangent is None else -self.tangent)

    def __pow__(self, exponent: float) -> "Dual":
        e = float(exponent)
        return Dual(self.primal**e, _scale(self.tangent, e * self.primal ** (e - 1.0)))

    def __matmul__(self, weight: Operand) -> "Dual":
        """Right-multiply by a matrix that does not depend on position."""
        return Dual(self.primal @ weight, None if self.tangent is None else self.tangent @ weight)

    def __getitem__(self, key: Any) -> "Dual":
        tangent = self.full_tangent()
        if tangent is None:
            return Dual(self.primal[key])
        parts = key if isinstance(key, tuple) else (key,)
        return Dual(self.primal[key], tangent[(slice(None),) + parts])

    # unary functions
    def exp(self) -> "Dual":
        out = self.primal.exp()
        return Dual(out, _scale(self.tangent, out))

    def log(self) -> "Dual":
        return Dual(self.primal.log(), None if self.tangent is None else self.tangent / self.primal)

    def sqrt(self) -> "Dual":
        out = self.primal.sqrt()
        return Dual(out, None if self.tangent is None else self.tangent * 0.5 / out)

    def abs(self) -> "Dual":
        return Dual(self.primal.abs(), _scale(self.tangent, np.sign(self.primal.value)))

    def sin(self) -> "Dual":
        return Dual(self.primal.sin(), _scale(self.tangent, self.primal.cos()))

    def cos(self) -> "Dual":
        return Dual(self.primal.cos(), _scale(self.tangent, -self.primal.sin()))

    def sigmoid(self) -> "Dual":
        out = self.primal.sigmoid()
        return Dual(out, _scale(self.tangent, out * (1.0 - out)))

    def softplus(self, beta: float = 1.0) -> "Dual":
        slope = (self.primal * beta).sigmoid()
        return Dual(self.primal.softplus(beta), _scale(self.tangent, slope))

    def relu(self) -> "Dual":
        active = (self.primal.value > 0.0).astype(np.float64)
        return Dual(self.primal.relu(), _scale(self.tangent, active))

    def maximum(self, other: Any) -> "Dual":
        return self._select(other, ops.maximum, np.greater_equal)

    def minimum(self, other: Any) -> "Dual":
        return self._select(other, ops.minimum, np.less_equal)

    def _select(self, other: Any, op: Callable[[Operand, Operand], Tensor], first: Any) -> "Dual":
        o, ta, tb, ndim = self._binary_parts(other)
        out = op(self.primal, o.primal)
        if ta is None and tb is None:
            return Dual(out)
        mask = first(self.primal.value, o.primal.value)
        shape = (N_AXES,) + out.shape
        ta_full = ta.broadcast_to(shape) if ta is not None else np.zeros(shape)
        tb_full = tb.broadcast_to(shape) if tb is not None else np.zeros(shape)
        return Dual(out, ops.where(np.broadcast_to(mask, out.shape), ta_full, tb_full))

    # reductions and layout
    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Dual":
        primal = self.primal.sum(axis=axis, keepdims=keepdims)
        if self.tangent is None:
            return Dual(primal)
        tangent = self.full_tangent()
        assert tangent is not None
        if axis is None:
            flat = tangent.reshape(N_AXES, -1).sum(axis=1)
            if keepdims:
                flat = flat.reshape((N_AXES,) + (1,) * self.ndim)
            return Dual(primal, flat)
        t_axis = axis + 1 if axis >= 0 else axis
        return Dual(primal, tangent.sum(axis=t_axis, keepdims=keepdims))

    def reshape(self, *shape: Any) -> "Dual":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        primal = self.primal.reshape(shape)
        if self.tangent is None:
            return Dual(primal)
        tangent = self.full_tangent()
        assert tangent is not None
        return Dual(primal, tangent.reshape((N_AXES,) + primal.shape))


def concat(values: Sequence[Value], axis: int = -1) -> Value:
    """Concatenate tensors, or duals when any input is a dual."""
    if not any(isinstance(v, Dual) for v in values):
        return ops.concat(values, axis=axis)
    duals = [Dual.lift(v) for v in values]
    primal = ops.concat([d.primal for d in duals], axis=axis)
    ndim = primal.ndim
    tangents = []
    for d in duals:
        t = d.full_tangent()
        tangents.append(t if t is not None else np.zeros((N_AXES,) + d.shape))
    t_axis = axis % ndim + 1
    return Dual(primal, ops.concat(tangents, axis=t_axis))


def seed_dual(x: Operand) -> Dual:
    """Dual of a batch of points ``(..., 3)`` with identity tangents."""
    point = constant(x)
    basis = np.eye(N_AXES).reshape((N_AXES,) + (1,) * (point.ndim - 1) + (N_AXES,))
    basis = np.broadcast_to(basis, (N_AXES,) + point.shape)
    return Dual(point, Tensor(basis.copy()))


def value_and_spatial_gradient(f: Callable[[Dual], Value], x: Operand) -> tuple[Tensor, Tensor]:
    """Evaluate ``f`` at points ``x`` of shape ``(..., 3)`` with its gradient.

    ``f`` maps a batch of points to one scalar per point (shape ``(...)``).
    The returned gradient has shape ``(..., 3)``; when ``f`` reads tape
    parameters the gradient entries are graph nodes on the same tape.
    """
    out = f(seed_dual(x))
    if not isinstance(out, Dual) or out.tangent is None:
        primal = out.primal if isinstance(out, Dual) else constant(out)
        return primal, Tensor(np.zeros(primal.shape + (N_AXES,)))
    return out.primal, ops.moveaxis(out.full_tangent(), 0, -1)


def spatial_gradient(f: Callable[[Dual], Value], x: Operand) -> Tensor:
    """Gradient of a scalar field ``f`` at ``x``; see ``value_and_spatial_gradient``.

    Example:
        >>> spatial_gradient(lambda p: (p * p).sum(axis=-1).sqrt() - 1.0, [2.0, 0.0, 0.0]).value
        array([1., 0., 0.])
    """
    return value_and_spatial_gradient(f, x)[1]
