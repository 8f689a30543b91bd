"""Geometry and radiance fields with positional encoding and checkpoints."""

from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .encoding import encoded_dim, positional_encode
from .networks import (
    GeometryNet,
    GeometryOutput,
    RadianceNet,
    geometry_forward,
    init_radiance,
    init_sphere,
    radiance_forward,
)

__all__ = [
    "Checkpoint",
    "GeometryNet",
    "GeometryOutput",
    "RadianceNet",
    "encoded_dim",
    "geometry_forward",
    "init_radiance",
    "init_sphere",
    "positional_encode",
    "radiance_forward",
    "read_checkpoint",
    "write_checkpoint",
]
