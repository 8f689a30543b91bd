"""Define-by-run reverse-mode tape.

A ``Tape`` is an append-only list of ``Node`` records. Every node stores the
primitive name, the indices of its operands (always smaller than its own
index, so the list is a topological order), the op attributes and its cached
float64 value. ``Tensor`` is the user-facing handle: arithmetic on tensors
bound to a tape appends nodes; tensors without a tape are constants and
their arithmetic records nothing.

Tapes are confined to one worker and rebuilt for every ray batch.
"""

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np
from numpy.typing import NDArray

from src.autodiff.primitives import PRIMITIVES, Array
from src.utils.errors import RejectedInputError

LEAF_OPS = ("leaf", "const")


@dataclass(frozen=True)
class Node:
    """One primitive application recorded on a tape."""

    op: str
    parents: tuple[int, ...]
    value: Array
    attrs: dict[str, Any] = field(default_factory=dict)
    name: Optional[str] = None


class Tape:
    """Append-only record of primitive applications.

    Example:
        >>> tape = Tape()
        >>> x = tape.leaf(3.0)
        >>> y = x * x
        >>> tape.backward(y)[x.index]
        array(6.)
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, value: Any, name: Optional[str] = None) -> "Tensor":
        """Record a differentiable input (a parameter or a variable)."""
        return self._append(Node("leaf", (), _as_array(value).copy(), name=name))

    def constant(self, value: Any) -> "Tensor":
        """Record a value that takes part in the graph but is never a target."""
        return self._append(Node("const", (), _as_array(value)))

    def record(
        self, op: str, parents: tuple[int, ...], value: Array, attrs: dict[str, Any]
    ) -> "Tensor":
        return self._append(Node(op, parents, value, attrs))

    def _append(self, node: Node) -> "Tensor":
        self.nodes.append(node)
        return Tensor(node.value, self, len(self.nodes) - 1)

    def index_of(self, operand: Any) -> int:
        """Index of an operand on this tape, recording constants as needed."""
        if isinstance(operand, Tensor) and operand.tape is self:
            return operand.index  # type: ignore[return-value]
        value = operand.value if isinstance(operand, Tensor) else operand
        return self.constant(value).index  # type: ignore[return-value]

    def backward(self, output: Union[int, "Tensor"], seed: Optional[Array] = None) -> "Adjoints":
        """Propagate adjoints from ``output`` back to every node.

        Args:
            output: Node index or tensor on this tape. Must hold a single
                element unless ``seed`` is given.
            seed: Optional upstream gradient with the output's shape.

        Returns:
            Mapping node index -> adjoint; nodes unreachable from the output
            have a zero adjoint.

        Raises:
            RejectedInputError: On an invalid index, a foreign tensor, a
                non-scalar output without seed or a seed of the wrong shape.
        """
        index = self._resolve(output)
        value = self.nodes[index].value
        if seed is None:
            if value.size != 1:
                raise RejectedInputError(
                    f"backward needs a scalar output or an explicit seed, got shape {value.shape}"
                )
            seed = np.ones_like(value)
        else:
            seed = _as_array(seed)
            if seed.shape != value.shape:
                raise RejectedInputError(f"seed shape {seed.shape} != output shape {value.shape}")

        adjoints: list[Optional[Array]] = [None] * len(self.nodes)
        adjoints[index] = seed
        for i in range(index, -1, -1):
            g = adjoints[i]
            node = self.nodes[i]
            if g is None or node.op in LEAF_OPS:
                continue
            operands = [self.nodes[p].value for p in node.parents]
            grads = PRIMITIVES[node.op].vjp(g, node.value, *operands, **node.attrs)
            for parent, grad in zip(node.parents, grads):
                if grad is None:
                    continue
                if adjoints[parent] is None:
                    adjoints[parent] = grad
                else:
                    adjoints[parent] = adjoints[parent] + grad
        return Adjoints(self, adjoints)

    def replay(self) -> list[Array]:
        """Recompute every node's value from the leaves, in tape order."""
        values: list[Array] = []
        for node in self.nodes:
            if node.op in LEAF_OPS:
                values.append(node.value)
                continue
            operands = [values[p] for p in node.parents]
            values.append(PRIMITIVES[node.op].forward(*operands, **node.attrs))
        return values

    def _resolve(self, output: Union[int, "Tensor"]) -> int:
        if isinstance(output, Tensor):
            if output.tape is not self or output.index is None:
                raise RejectedInputError("output tensor is not recorded on this tape")
            return output.index
        if isinstance(output, (int, np.integer)) and not isinstance(output, bool):
            if 0 <= int(output) < len(self.nodes):
                return int(output)
        raise RejectedInputError(
            f"invalid node index {output!r} for tape of {len(self.nodes)} nodes"
        )


class Adjoints(Mapping[int, Array]):
    """Adjoints per node index; missing entries read as zeros."""

    def __init__(self, tape: Tape, adjoints: list[Optional[Array]]) -> None:
        self._tape = tape
        self._adjoints = adjoints

    def __getitem__(self, index: int) -> Array:
        if not 0 <= index < len(self._adjoints):
            raise KeyError(index)
        g = self._adjoints[index]
        if g is None:
            return np.zeros_like(self._tape.nodes[index].value)
        return g

    def __iter__(self) -> Iterator[int]:
        return iter(range(len(self._adjoints)))

    def __len__(self) -> int:
        return len(self._adjoints)

    def of(self, tensor: "Tensor") -> Array:
        """Adjoint of a tensor recorded on the same tape."""
        if tensor.tape is not self._tape or tensor.index is None:
            raise RejectedInputError("tensor is not recorded on this tape")
        return self[tensor.index]


Operand = Union["Tensor", float, int, Array]


def _as_array(value: Any) -> Array:
    if isinstance(value, Tensor):
        return value.value
    return np.asarray(value, dtype=np.float64)


def _defers(other: Any) -> bool:
    """True when ``other`` wraps tensors itself and must handle the operator."""
    return getattr(other, "__array_priority__", 0) > Tensor.__array_priority__


def apply(op: str, *operands: Operand, **attrs: Any) -> "Tensor":
    """Evaluate a primitive and record it when any operand lives on a tape."""
    tapes = {id(t.tape): t.tape for t in operands if isinstance(t, Tensor) and t.tape is not None}
    if len(tapes) > 1:
        raise RejectedInputError("operands are recorded on different tapes")
    values = [_as_array(o) for o in operands]
    out = PRIMITIVES[op].forward(*values, **attrs)
    if not tapes:
        return Tensor(out)
    tape = next(iter(tapes.values()))
    parents = tuple(tape.index_of(o) for o in operands)
    return tape.record(op, parents, out, attrs)


class Tensor:
    """Handle on a float64 array, optionally recorded on a tape."""

    __slots__ = ("value", "tape", "index")
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(
        self, value: Any, tape: Optional[Tape] = None, index: Optional[int] = None
    ) -> None:
        self.value: Array = _as_array(value)
        self.tape = tape
        self.index = index

    def __repr__(self) -> str:
        where = f"node {self.index}" if self.tape is not None else "const"
        return f"Tensor(shape={self.shape}, {where})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.item())

    def detach(self) -> "Tensor":
        """Same value, cut from the graph."""
        return Tensor(self.value)

    # arithmetic
    def __add__(self, other: Operand) -> "Tensor":
        if _defers(other):
            return NotImplemented
        return apply("add", self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return apply("add", other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        if _defers(other):
            return NotImplemented
        return apply("sub", self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return apply("sub", other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        if _defers(other):
            return NotImplemented
        return apply("mul", self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return apply("mul", other, self)

    def __truediv__(self, other: Operand) -> "Tensor":
        if _defers(other):
            return NotImplemented
        return apply("div", self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return apply("div", other, self)

    def __neg__(self) -> "Tensor":
        return apply("neg", self)

    def __pow__(self, exponent: float) -> "Tensor":
        return apply("pow", self, exponent=float(exponent))

    def __matmul__(self, other: Operand) -> "Tensor":
        if _defers(other):
            return NotImplemented
        return apply("matmul", self, other)

    def __rmatmul__(self, other: Operand) -> "Tensor":
        return apply("matmul", other, self)

    def __getitem__(self, key: Any) -> "Tensor":
        return apply("getitem", self, key=key)

    # unary functions
    def exp(self) -> "Tensor":
        return apply("exp", self)

    def expm1(self) -> "Tensor":
        return apply("expm1", self)

    def log(self) -> "Tensor":
        return apply("log", self)

    def sqrt(self) -> "Tensor":
        return apply("sqrt", self)

    def abs(self) -> "Tensor":
        return apply("abs", self)

    def sin(self) -> "Tensor":
        return apply("sin", self)

    def cos(self) -> "Tensor":
        return apply("cos", self)

    def sigmoid(self) -> "Tensor":
        return apply("sigmoid", self)

    def relu(self) -> "Tensor":
        return apply("relu", self)

    def softplus(self, beta: float = 1.0) -> "Tensor":
        return apply("softplus", self, beta=float(beta))

    def maximum(self, other: Operand) -> "Tensor":
        return apply("maximum", self, other)

    def minimum(self, other: Operand) -> "Tensor":
        return apply("minimum", self, other)

    # reductions and layout
    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return apply("sum", self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        count = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return apply("reshape", self, shape=self.value.reshape(shape).shape)

    def broadcast_to(self, shape: tuple[int, ...]) -> "Tensor":
        return apply("broadcast_to", self, shape=tuple(shape))

    def moveaxis(self, source: int, destination: int) -> "Tensor":
        return apply("moveaxis", self, source=source, destination=destination)


def constant(value: Any) -> Tensor:
    """Wrap a value as a tape-less constant tensor."""
    return value if isinstance(value, Tensor) else Tensor(value)


def is_recorded(value: Any) -> bool:
    return isinstance(value, Tensor) and value.tape is not None


def to_numpy(value: Any) -> NDArray[np.float64]:
    return _as_array(value)
