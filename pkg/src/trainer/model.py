"""The trainable fields of one run: geometry net, radiance net and sharpness."""

import json
import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.autodiff.tape import Tape, Tensor
from src.fields.checkpoint import Checkpoint
from src.fields.networks import GeometryNet, RadianceNet, init_radiance, init_sphere
from src.renderer.volume import SharpnessParam
from src.utils.config import Settings, build_settings
from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

Arrays = dict[str, NDArray[np.float64]]


@dataclass
class FieldModel:
    """Network layouts and the sharpness parametrization built from ``Settings``."""

    settings: Settings
    geometry: GeometryNet
    radiance: RadianceNet
    sharpness: SharpnessParam

    @classmethod
    def from_settings(cls, settings: Settings) -> "FieldModel":
        geometry = GeometryNet(settings.geometry, settings.encoding)
        radiance = RadianceNet(settings.radiance, settings.encoding, geometry.feature_dim)
        sharpness = SharpnessParam(scale=settings.train.sharpness_scale)
        return cls(settings, geometry, radiance, sharpness)

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        shapes = {**self.geometry.parameter_shapes(), **self.radiance.parameter_shapes()}
        shapes[self.sharpness.name] = (1,)
        return shapes

    def init_params(self, seed: int) -> Arrays:
        """Sphere-initialized geometry, fan-in radiance weights and ``s = 1 / init_std``."""
        params = init_sphere(self.geometry, self.settings.geometry.init_radius, seed)
        params.update(init_radiance(self.radiance, seed + 1))
        params[self.sharpness.name] = self.sharpness.initial(self.settings.train.init_std)
        return params

    def bind(self, tape: Tape, params: Mapping[str, NDArray[np.float64]]) -> dict[str, Tensor]:
        """Record every parameter as a named leaf of ``tape``."""
        return {name: tape.leaf(value, name=name) for name, value in params.items()}

    def inv_std(self, params: Mapping[str, NDArray[np.float64]]) -> float:
        return self.sharpness.value(params[self.sharpness.name])

    def sdf_field(
        self, params: Mapping[str, NDArray[np.float64]]
    ) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
        return self.geometry.sdf_field(params)

    def checkpoint(
        self, params: Mapping[str, NDArray[np.float64]], iteration: int, extra: Arrays
    ) -> Checkpoint:
        tensors = dict(params)
        tensors.update(extra)
        config_json = self.settings.model_dump_json()
        return Checkpoint(tensors=tensors, iteration=iteration, config_json=config_json)

    def params_from(self, ckpt: Checkpoint) -> Arrays:
        """Parameter arrays of this model stored in ``ckpt``.

        Raises:
            CheckpointError: If a parameter is missing or has the wrong shape.
        """
        params: Arrays = {}
        for name, shape in self.parameter_shapes().items():
            value = ckpt.tensors.get(name)
            if value is None or value.shape != shape:
                found = None if value is None else value.shape
                raise CheckpointError(
                    "<checkpoint>", f"parameter '{name}' expected shape {shape}, found {found}"
                )
            params[name] = value
        return params


def load_model(ckpt: Checkpoint) -> tuple[FieldModel, Arrays]:
    """Rebuild the model from the settings stored in a checkpoint."""
    try:
        settings = build_settings(json.loads(ckpt.config_json))
    except json.JSONDecodeError as e:
        raise CheckpointError("<checkpoint>", f"stored configuration is not JSON: {e}") from e
    model = FieldModel.from_settings(settings)
    return model, model.params_from(ckpt)
