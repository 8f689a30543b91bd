"""Registry of differentiable primitives.

Each primitive pairs a forward function over float64 arrays with its
vector-Jacobian product. Elementwise primitives broadcast like numpy and
their VJPs sum-reduce the upstream gradient back to each operand's shape.

Subgradient conventions at kinks:
    abs'(0) = 0; relu'(0) = 0;
    maximum(a, b) sends the gradient to ``a`` when a >= b (ties: first operand);
    minimum(a, b) sends the gradient to ``a`` when a <= b (ties: first operand).
"""

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

Array = NDArray[np.float64]
Grads = tuple[Optional[Array], ...]


@dataclass(frozen=True)
class Primitive:
    """A forward rule and its VJP.

    ``forward(*values, **attrs)`` returns the output array;
    ``vjp(g, out, *values, **attrs)`` returns one gradient per operand.
    """

    name: str
    forward: Callable[..., Array]
    vjp: Callable[..., Grads]


PRIMITIVES: dict[str, Primitive] = {}


def register(name: str, forward: Callable[..., Array], vjp: Callable[..., Grads]) -> None:
    PRIMITIVES[name] = Primitive(name=name, forward=forward, vjp=vjp)


def unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum ``g`` over the axes that broadcasting added or stretched to reach it."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _swap(a: Array) -> Array:
    return np.swapaxes(a, -1, -2)


# -- elementwise binary ------------------------------------------------------

register(
    "add",
    lambda a, b: a + b,
    lambda g, out, a, b: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)),
)
register(
    "sub",
    lambda a, b: a - b,
    lambda g, out, a, b: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)),
)
register(
    "mul",
    lambda a, b: a * b,
    lambda g, out, a, b: (unbroadcast(g * b, a.shape), unbroadcast(g * a, b.shape)),
)
register(
    "div",
    lambda a, b: a / b,
    lambda g, out, a, b: (unbroadcast(g / b, a.shape), unbroadcast(-g * out / b, b.shape)),
)
register(
    "maximum",
    lambda a, b: np.maximum(a, b),
    lambda g, out, a, b: (
        unbroadcast(np.where(a >= b, g, 0.0), a.shape),
        unbroadcast(np.where(a >= b, 0.0, g), b.shape),
    ),
)
register(
    "minimum",
    lambda a, b: np.minimum(a, b),
    lambda g, out, a, b: (
        unbroadcast(np.where(a <= b, g, 0.0), a.shape),
        unbroadcast(np.where(a <= b, 0.0, g), b.shape),
    ),
)


def _where_fwd(a: Array, b: Array, *, cond: NDArray[np.bool_]) -> Array:
    return np.where(cond, a, b)


def _where_vjp(g: Array, out: Array, a: Array, b: Array, *, cond: NDArray[np.bool_]) -> Grads:
    return (
        unbroadcast(np.where(cond, g, 0.0), a.shape),
        unbroadcast(np.where(cond, 0.0, g), b.shape),
    )


register("where", _where_fwd, _where_vjp)


# -- elementwise unary -------------------------------------------------------

register("neg", lambda a: -a, lambda g, out, a: (-g,))
register("exp", lambda a: np.exp(a), lambda g, out, a: (g * out,))
register("expm1", lambda a: np.expm1(a), lambda g, out, a: (g * (out + 1.0),))
register("log", lambda a: np.log(a), lambda g, out, a: (g / a,))
register("sqrt", lambda a: np.sqrt(a), lambda g, out, a: (g * 0.5 / out,))
register("abs", lambda a: np.abs(a), lambda g, out, a: (g * np.sign(a),))
register("sin", lambda a: np.sin(a), lambda g, out, a: (g * np.cos(a),))
register("cos", lambda a: np.cos(a), lambda g, out, a: (-g * np.sin(a),))
register("sigmoid", lambda a: expit(a), lambda g, out, a: (g * out * (1.0 - out),))
register("relu", lambda a: np.maximum(a, 0.0), lambda g, out, a: (g * (a > 0.0),))


def _pow_fwd(a: Array, *, exponent: float) -> Array:
    return np.power(a, exponent)


def _pow_vjp(g: Array, out: Array, a: Array, *, exponent: float) -> Grads:
    return (g * exponent * np.power(a, exponent - 1.0),)


register("pow", _pow_fwd, _pow_vjp)


def _softplus_fwd(a: Array, *, beta: float) -> Array:
    return np.logaddexp(0.0, beta * a) / beta


def _softplus_vjp(g: Array, out: Array, a: Array, *, beta: float) -> Grads:
    return (g * expit(beta * a),)


register("softplus", _softplus_fwd, _softplus_vjp)


# -- linear algebra and reductions --------------------------------------------


def _matmul_vjp(g: Array, out: Array, a: Array, b: Array) -> Grads:
    return (unbroadcast(g @ _swap(b), a.shape), unbroadcast(_swap(a) @ g, b.shape))


register("matmul", lambda a, b: a @ b, _matmul_vjp)


def _sum_fwd(a: Array, *, axis: Optional[int], keepdims: bool) -> Array:
    return np.asarray(np.sum(a, axis=axis, keepdims=keepdims))


def _sum_vjp(g: Array, out: Array, a: Array, *, axis: Optional[int], keepdims: bool) -> Grads:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, a.shape).copy(),)


register("sum", _sum_fwd, _sum_vjp)


# -- structural ----------------------------------------------------------------


def _reshape_fwd(a: Array, *, shape: tuple[int, ...]) -> Array:
    return a.reshape(shape)


def _reshape_vjp(g: Array, out: Array, a: Array, *, shape: tuple[int, ...]) -> Grads:
    return (g.reshape(a.shape),)


register("reshape", _reshape_fwd, _reshape_vjp)


def _broadcast_fwd(a: Array, *, shape: tuple[int, ...]) -> Array:
    return np.broadcast_to(a, shape).copy()


def _broadcast_vjp(g: Array, out: Array, a: Array, *, shape: tuple[int, ...]) -> Grads:
    return (unbroadcast(g, a.shape),)


register("broadcast_to", _broadcast_fwd, _broadcast_vjp)


def _moveaxis_fwd(a: Array, *, source: int, destination: int) -> Array:
    return np.moveaxis(a, source, destination).copy()


def _moveaxis_vjp(g: Array, out: Array, a: Array, *, source: int, destination: int) -> Grads:
    return (np.moveaxis(g, destination, source),)


register("moveaxis", _moveaxis_fwd, _moveaxis_vjp)


def _concat_fwd(*values: Array, axis: int) -> Array:
    return np.concatenate(values, axis=axis)


def _concat_vjp(g: Array, out: Array, *values: Array, axis: int) -> Grads:
    sizes = np.cumsum([v.shape[axis] for v in values])[:-1]
    return tuple(np.split(g, sizes, axis=axis))


register("concat", _concat_fwd, _concat_vjp)


def _getitem_fwd(a: Array, *, key: Any) -> Array:
    return np.asarray(a[key]).copy()


def _is_basic_index(key: Any) -> bool:
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(p, (int, slice, type(Ellipsis))) or p is None for p in parts)


def _getitem_vjp(g: Array, out: Array, a: Array, *, key: Any) -> Grads:
    grad = np.zeros_like(a)
    if _is_basic_index(key):
        grad[key] += g
    else:
        np.add.at(grad, key, g)
    return (grad,)


register("getitem", _getitem_fwd, _getitem_vjp)


def _take_fwd(a: Array, *, indices: NDArray[np.intp], axis: int) -> Array:
    return np.take_along_axis(a, indices, axis=axis)


def _take_vjp(g: Array, out: Array, a: Array, *, indices: NDArray[np.intp], axis: int) -> Grads:
    grad = np.zeros_like(a)
    index = list(np.indices(indices.shape, sparse=True))
    index[axis % a.ndim] = indices
    np.add.at(grad, tuple(index), g)
    return (grad,)


register("take_along_axis", _take_fwd, _take_vjp)


def _cumprod_fwd(a: Array) -> Array:
    """Exclusive cumulative product along the last axis, total appended.

    Output has one more entry than the input: out[..., 0] = 1 and
    out[..., i] = prod(a[..., :i]); out[..., -1] is the full product.
    """
    ones = np.ones(a.shape[:-1] + (1,))
    return np.concatenate([ones, np.cumprod(a, axis=-1)], axis=-1)


def _cumprod_vjp(g: Array, out: Array, a: Array) -> Grads:
    # grad_k = out_k * S_k with S_k = g_{k+1} + a_{k+1} S_{k+1}; no division by a.
    n = a.shape[-1]
    grad = np.empty_like(a)
    acc = g[..., n]
    grad[..., n - 1] = out[..., n - 1] * acc
    for k in range(n - 2, -1, -1):
        acc = g[..., k + 1] + a[..., k + 1] * acc
        grad[..., k] = out[..., k] * acc
    return (grad,)


register("cumprod_exclusive", _cumprod_fwd, _cumprod_vjp)
