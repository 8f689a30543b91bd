"""Geometry (SDF) and radiance MLPs.

Networks are stateless layout descriptions; their parameters live in a plain
``name -> array`` mapping so that the trainer can bind them as tape leaves
and the checkpoint codec can store them as-is. Weights are stored ``(in, out)``
and applied as ``h @ W + b``.
"""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import NDArray
from sklearn.linear_model import Ridge

from src.autodiff import ops
from src.autodiff.dual import Dual, Value, concat, seed_dual
from src.autodiff.tape import Operand, Tensor, constant
from src.fields.encoding import encode_direction, encode_position, encoded_dim
from src.utils.config import EncodingConfig, GeometryConfig, RadianceConfig
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)

Params = Mapping[str, Operand]
ParamArrays = dict[str, NDArray[np.float64]]

UNIT_TOLERANCE = 1e-6
CALIBRATION_POINTS = 4096
CALIBRATION_RADIUS = 1.5
CALIBRATION_RIDGE = 1e-3


def _linear(params: Params, prefix: str, index: int, h: Value) -> Value:
    return h @ params[f"{prefix}.l{index}.weight"] + params[f"{prefix}.l{index}.bias"]


class GeometryNet:
    """SDF network: ``x -> (f(x), z(x))`` over a softplus trunk with skip inputs.

    Hidden layer ``i`` listed in ``skip_layers`` receives
    ``concat(h, encoded x) / sqrt(2)``, so its input width is
    ``width + encoded_dim``.
    """

    prefix = "geometry"

    def __init__(self, cfg: GeometryConfig, encoding: EncodingConfig) -> None:
        self.cfg = cfg
        self.encoding = encoding
        self.enc_dim = encoded_dim(encoding.num_freqs_position, encoding.include_identity)

    @property
    def feature_dim(self) -> int:
        return self.cfg.feature_dim

    @property
    def output_dim(self) -> int:
        return 1 + self.cfg.feature_dim

    def layer_dims(self) -> list[tuple[int, int]]:
        """``(in, out)`` of every linear layer; the last one is the output head."""
        dims: list[tuple[int, int]] = []
        in_dim = self.enc_dim
        for layer in range(self.cfg.n_layers):
            if layer in self.cfg.skip_layers:
                in_dim += self.enc_dim
            dims.append((in_dim, self.cfg.width))
            in_dim = self.cfg.width
        dims.append((in_dim, self.output_dim))
        return dims

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (n_in, n_out) in enumerate(self.layer_dims()):
            shapes[f"{self.prefix}.l{i}.weight"] = (n_in, n_out)
            shapes[f"{self.prefix}.l{i}.bias"] = (n_out,)
        return shapes

    def hidden(self, params: Params, x: Any) -> Value:
        """Last hidden activation for points ``(..., 3)``."""
        enc = encode_position(x, self.encoding)
        h = enc
        for layer in range(self.cfg.n_layers):
            if layer in self.cfg.skip_layers:
                h = concat([h, enc], axis=-1) * (1.0 / math.sqrt(2.0))
            h = _linear(params, self.prefix, layer, h).softplus(self.cfg.softplus_beta)
        return h

    def forward(self, params: Params, x: Any) -> Value:
        """Raw output ``(..., 1 + N_f)``: sdf first, then the feature vector."""
        return _linear(params, self.prefix, self.cfg.n_layers, self.hidden(params, x))

    def sdf(self, params: Params, x: Any) -> Tensor:
        """SDF values ``(...)`` without spatial derivatives."""
        h = self.hidden(params, constant(x))
        assert isinstance(h, Tensor)
        last = self.cfg.n_layers
        weight = params[f"{self.prefix}.l{last}.weight"]
        bias = params[f"{self.prefix}.l{last}.bias"]
        out = h @ weight[:, :1] + bias[:1]  # type: ignore[index]
        return out[..., 0]

    def sdf_field(
        self, params: Mapping[str, NDArray[np.float64]]
    ) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
        """Plain ``points -> sdf`` callable over fixed parameter arrays."""

        def field(points: NDArray[np.float64]) -> NDArray[np.float64]:
            return self.sdf(params, points).value

        return field


@dataclass
class GeometryOutput:
    """SDF value, feature vector and raw SDF gradient per point."""

    sdf: Tensor
    z: Tensor
    normal: Tensor


def geometry_forward(net: GeometryNet, params: Params, x: Any) -> GeometryOutput:
    """Evaluate ``f``, ``z`` and ``grad f`` at points ``(..., 3)``.

    The normal is the unnormalized gradient. When ``params`` or ``x`` are
    recorded on a tape, all three outputs are graph nodes, so losses on the
    normal differentiate back into the parameters.
    """
    point = seed_dual(x)
    h = net.hidden(params, point)
    assert isinstance(h, Dual)
    last = net.cfg.n_layers
    weight = params[f"{net.prefix}.l{last}.weight"]
    bias = params[f"{net.prefix}.l{last}.bias"]
    sdf = (h @ weight[:, :1] + bias[:1])[..., 0]  # type: ignore[index]
    z = h.primal @ weight[:, 1:] + bias[1:]  # type: ignore[index]
    tangent = sdf.full_tangent()
    if tangent is not None:
        normal = ops.moveaxis(tangent, 0, -1)
    else:
        normal = Tensor(np.zeros(sdf.shape + (3,)))
    return GeometryOutput(sdf=sdf.primal, z=z, normal=normal)


def init_sphere(net: GeometryNet, radius: float, rng_seed: int) -> ParamArrays:
    """Geometric initialization so that ``f(x)`` approximates ``|x| - radius``.

    Hidden weights are drawn from N(0, 2/out); the frequency rows of the
    input (and of the skip inputs) start at zero so the trunk initially sees
    only raw coordinates. The head has mean sqrt(pi)/sqrt(width), tiny
    spread and bias ``-radius`` (both signs flipped for ``inside_outside``).

    A finite trunk only matches the sphere in expectation, so the SDF column
    of the head is then corrected by a ridge fit of the remaining error on
    ``CALIBRATION_POINTS`` seeded points with ``|x| <= CALIBRATION_RADIUS``.

    Raises:
        RejectedInputError: If ``radius <= 0``.
    """
    if radius <= 0:
        raise RejectedInputError(f"sphere radius must be positive, got {radius}")

    rng = np.random.default_rng(rng_seed)
    dims = net.layer_dims()
    head = len(dims) - 1
    freq_rows = net.enc_dim - 3 if net.encoding.include_identity else 0
    sign = -1.0 if net.cfg.inside_outside else 1.0
    params: ParamArrays = {}

    for i, (n_in, n_out) in enumerate(dims):
        if i == head:
            mean = sign * math.sqrt(math.pi) / math.sqrt(n_in)
            weight = rng.normal(mean, 1e-4, size=(n_in, n_out))
            bias = np.full(n_out, -sign * radius)
        else:
            weight = rng.normal(0.0, math.sqrt(2.0) / math.sqrt(n_out), size=(n_in, n_out))
            bias = np.zeros(n_out)
            if freq_rows > 0 and i == 0:
                weight[3:, :] = 0.0
            elif freq_rows > 0 and i in net.cfg.skip_layers:
                weight[-freq_rows:, :] = 0.0
        params[f"{net.prefix}.l{i}.weight"] = weight
        params[f"{net.prefix}.l{i}.bias"] = bias

    residual = _calibrate_head(net, params, radius, sign, rng)
    logger.debug(
        "Sphere-initialized geometry net (radius=%s, seed=%s, fit rms=%.3g)",
        radius,
        rng_seed,
        residual,
    )
    return params


def _calibrate_head(
    net: GeometryNet, params: ParamArrays, radius: float, sign: float, rng: np.random.Generator
) -> float:
    """Ridge-fit the SDF column of the head to the sphere; returns the RMS error left."""
    directions = rng.normal(size=(CALIBRATION_POINTS, 3))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    radii = rng.uniform(0.0, CALIBRATION_RADIUS, size=(CALIBRATION_POINTS, 1))
    points = directions * radii

    hidden = net.hidden(params, constant(points))
    assert isinstance(hidden, Tensor)
    features = hidden.value
    head = f"{net.prefix}.l{net.cfg.n_layers}"
    current = features @ params[f"{head}.weight"][:, 0] + params[f"{head}.bias"][0]
    target = sign * (radii[:, 0] - radius)

    fit = Ridge(alpha=CALIBRATION_RIDGE).fit(features, target - current)
    params[f"{head}.weight"][:, 0] += fit.coef_
    params[f"{head}.bias"][0] += fit.intercept_
    error = features @ params[f"{head}.weight"][:, 0] + params[f"{head}.bias"][0] - target
    return float(np.sqrt(np.mean(error * error)))


class RadianceNet:
    """Color network ``(enc x, enc v, n, z) -> rgb`` with ReLU hidden layers."""

    prefix = "radiance"

    def __init__(self, cfg: RadianceConfig, encoding: EncodingConfig, feature_dim: int) -> None:
        self.cfg = cfg
        self.encoding = encoding
        self.feature_dim = feature_dim

    def input_dim(self) -> int:
        enc = self.encoding
        return (
            encoded_dim(enc.num_freqs_position, enc.include_identity)
            + encoded_dim(enc.num_freqs_direction, enc.include_identity)
            + 3
            + self.feature_dim
        )

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = []
        in_dim = self.input_dim()
        for _ in range(self.cfg.n_layers):
            dims.append((in_dim, self.cfg.width))
            in_dim = self.cfg.width
        dims.append((in_dim, 3))
        return dims

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for i, (n_in, n_out) in enumerate(self.layer_dims()):
            shapes[f"{self.prefix}.l{i}.weight"] = (n_in, n_out)
            shapes[f"{self.prefix}.l{i}.bias"] = (n_out,)
        return shapes


def init_radiance(net: RadianceNet, rng_seed: int) -> ParamArrays:
    """Uniform fan-in initialization, U(-1/sqrt(in), 1/sqrt(in)) for weights and biases."""
    rng = np.random.default_rng(rng_seed)
    params: ParamArrays = {}
    for i, (n_in, n_out) in enumerate(net.layer_dims()):
        bound = 1.0 / math.sqrt(n_in)
        params[f"{net.prefix}.l{i}.weight"] = rng.uniform(-bound, bound, size=(n_in, n_out))
        params[f"{net.prefix}.l{i}.bias"] = rng.uniform(-bound, bound, size=n_out)
    return params


def radiance_forward(net: RadianceNet, params: Params, x: Any, v: Any, n: Any, z: Any) -> Tensor:
    """Colors ``(..., 3)`` in [0, 1] for points, unit view directions, normals and features.

    Raises:
        RejectedInputError: If any view direction is not unit length within 1e-6.
    """
    directions = constant(v)
    lengths = np.linalg.norm(directions.value, axis=-1)
    if lengths.size and np.max(np.abs(lengths - 1.0)) > UNIT_TOLERANCE:
        raise RejectedInputError("view directions must be unit length")

    h: Value = concat(
        [
            encode_position(x, net.encoding),
            encode_direction(directions, net.encoding),
            constant(n),
            constant(z),
        ],
        axis=-1,
    )
    for layer in range(net.cfg.n_layers):
        h = _linear(params, net.prefix, layer, h).relu()
    out = _linear(params, net.prefix, net.cfg.n_layers, h).sigmoid()
    assert isinstance(out, Tensor)
    return out
