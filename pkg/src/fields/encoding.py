"""Frequency positional encoding of points and view directions."""

import math
from typing import Any

from src.autodiff.dual import Dual, Value, concat
from src.autodiff.tape import constant
from src.utils.config import EncodingConfig
from src.utils.errors import RejectedInputError


def encoded_dim(num_freqs: int, include_identity: bool = True) -> int:
    """Length of the encoding of a 3-vector: 3 + 3*2*L with identity, 3*2*L without."""
    return (3 if include_identity else 0) + 6 * num_freqs


def positional_encode(p: Any, num_freqs: int, include_identity: bool = True) -> Value:
    """Encode points of shape ``(..., 3)``.

    The layout is ``[p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p),
    cos(2^(L-1) pi p)]``, each block holding the three components in order.
    Accepts arrays, tensors or duals and returns the same kind of value.

    Example:
        >>> positional_encode([0.5, 0.0, 0.0], 1).value[3]
        1.0
    """
    x: Value = p if isinstance(p, Dual) else constant(p)
    parts: list[Value] = [x] if include_identity else []
    for k in range(num_freqs):
        scaled = x * (2.0**k * math.pi)
        parts.append(scaled.sin())
        parts.append(scaled.cos())
    if not parts:
        raise RejectedInputError("encoding with no identity and no frequencies is empty")
    if len(parts) == 1:
        return parts[0]
    return concat(parts, axis=-1)


def encode_position(p: Any, cfg: EncodingConfig) -> Value:
    return positional_encode(p, cfg.num_freqs_position, cfg.include_identity)


def encode_direction(v: Any, cfg: EncodingConfig) -> Value:
    return positional_encode(v, cfg.num_freqs_direction, cfg.include_identity)
