"""Configuration management for reconstruction runs.

Loads settings from YAML files (or ``key = value`` text files with
``[section]`` headers), environment variables and command-line overrides,
with Pydantic validation.
"""

import configparser
import os
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.utils.errors import ConfigError

Vec3 = tuple[float, float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class EncodingConfig(_Section):
    """Positional encoding of positions and view directions."""

    num_freqs_position: int = Field(default=6, ge=0)
    num_freqs_direction: int = Field(default=4, ge=0)
    include_identity: bool = Field(default=True)


class GeometryConfig(_Section):
    """SDF network layout and initialization."""

    n_layers: int = Field(default=4, ge=1)
    width: int = Field(default=128, ge=1)
    skip_layers: list[int] = Field(default=[2])
    feature_dim: int = Field(default=64, ge=1)
    softplus_beta: float = Field(default=100.0, gt=0)
    init_radius: float = Field(default=0.5, gt=0)
    inside_outside: bool = Field(default=False)

    @model_validator(mode="after")
    def _check_skips(self) -> "GeometryConfig":
        for layer in self.skip_layers:
            if not 1 <= layer <= self.n_layers - 1:
                raise ValueError(f"skip layer {layer} outside 1..{self.n_layers - 1}")
        return self


class RadianceConfig(_Section):
    """Color network layout."""

    n_layers: int = Field(default=3, ge=1)
    width: int = Field(default=64, ge=1)


class RenderConfig(_Section):
    """Ray sampling and compositing."""

    n_coarse: int = Field(default=64, ge=2)
    n_fine: int = Field(default=64, ge=0)
    up_sample_steps: int = Field(default=4, ge=0)
    base_inv_s: float = Field(default=32.0, gt=0)
    perturb: bool = Field(default=True)
    bound_radius: float = Field(default=1.0, gt=0)
    background: Vec3 = Field(default=(0.0, 0.0, 0.0))
    weight_eps: float = Field(default=1e-4, gt=0)
    anchor: Literal["left", "midpoint"] = Field(default="left")
    chunk_rays: int = Field(default=1024, ge=1)


class FeatureConfig(_Section):
    """Feature maps for the multi-view consistency term."""

    extractor: Literal["pyramid", "file"] = Field(default="pyramid")
    feature_dir: Optional[str] = Field(default=None)
    channels: int = Field(default=32, ge=1)
    n_source_views: int = Field(default=2, ge=1)
    variance_floor: float = Field(default=1e-6, gt=0)


class SceneConfig(_Section):
    """Synthetic scene generation."""

    name: str = Field(default="sphere")
    n_views: int = Field(default=16, ge=2)
    resolution: int = Field(default=96, ge=2)
    camera_radius: float = Field(default=3.0, gt=0)
    fov_degrees: float = Field(default=40.0, gt=0, lt=180)
    elevation_range: tuple[float, float] = Field(default=(15.0, 45.0))
    background: Vec3 = Field(default=(0.0, 0.0, 0.0))
    gt_samples: int = Field(default=20000, ge=1)
    texture_seed: int = Field(default=7)
    seed: int = Field(default=0)


class MeshConfig(_Section):
    """Mesh extraction and Chamfer evaluation."""

    resolution: int = Field(default=128, ge=2)
    bbox_min: Vec3 = Field(default=(-1.0, -1.0, -1.0))
    bbox_max: Vec3 = Field(default=(1.0, 1.0, 1.0))
    slab_size: int = Field(default=16, ge=1)
    crop_to_unit_sphere: bool = Field(default=False)
    sample_points: int = Field(default=20000, ge=1)


class TrainConfig(_Section):
    """Optimization schedule and loss weights."""

    rays_per_iter: int = Field(default=512, ge=1)
    lr_max: float = Field(default=5e-4, gt=0)
    lr_min: float = Field(default=2.5e-5, gt=0)
    warmup_iters: int = Field(default=5000, ge=0)
    total_iters: int = Field(default=10000, ge=1)
    stage_boundaries: Optional[tuple[int, int]] = Field(default=None)
    eikonal_weight: float = Field(default=0.1, ge=0)
    stage_weights: list[tuple[float, float]] = Field(
        default=[(0.01, 0.0), (0.1, 0.5), (0.01, 0.05)]
    )
    init_std: float = Field(default=0.3, gt=0)
    sharpness_scale: float = Field(default=10.0, gt=0)
    detach_rendered_point: bool = Field(default=False)
    mode: Literal["baseline", "bias", "feature", "full"] = Field(default="full")
    holdout_views: list[int] = Field(default_factory=list)
    ckpt_every: int = Field(default=1000, ge=1)
    log_every: int = Field(default=100, ge=1)
    workers: int = Field(default=1, ge=1)
    seed: int = Field(default=0)

    @field_validator("stage_weights")
    @classmethod
    def _three_stages(cls, v: list[tuple[float, float]]) -> list[tuple[float, float]]:
        if len(v) != 3:
            raise ValueError(f"stage_weights needs 3 (beta, gamma) pairs, got {len(v)}")
        return v

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError(f"need 0 < lr_min <= lr_max, got {self.lr_min}, {self.lr_max}")
        first, second = self.boundaries()
        if not 0 <= first <= second < self.total_iters:
            raise ValueError(
                f"stage boundaries ({first}, {second}) must ascend and stay below "
                f"total_iters={self.total_iters}"
            )
        return self

    def boundaries(self) -> tuple[int, int]:
        """Stage boundaries; proportional (1/6, 1/2) of total_iters unless set."""
        if self.stage_boundaries is not None:
            return self.stage_boundaries
        return self.total_iters // 6, self.total_iters // 2


class LoggingConfig(_Section):
    """Logging configuration."""

    level: str = Field(default="INFO")
    format: str = Field(default="json")
    file: Optional[str] = Field(default=None)
    console: bool = Field(default=True)
    console_format: str = Field(default="text")
    rotate_size_mb: int = Field(default=10)
    backup_count: int = Field(default=5)


class Settings(_Section):
    """Main settings container (the full run configuration)."""

    preset: Literal["desk", "large"] = Field(default="desk")
    encoding: EncodingConfig = Field(default_factory=EncodingConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    radiance: RadianceConfig = Field(default_factory=RadianceConfig)
    render: RenderConfig = Field(default_factory=RenderConfig)
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


# Network and schedule sizes used for full-scale runs
LARGE_PRESET: dict[str, dict[str, Any]] = {
    "geometry": {"n_layers": 8, "width": 256, "skip_layers": [4], "feature_dim": 256},
    "radiance": {"n_layers": 4, "width": 256},
    "train": {"total_iters": 300000, "stage_boundaries": (50000, 150000)},
    "mesh": {"resolution": 512},
}

ENV_OVERRIDES: dict[str, str] = {
    "SURFRECON_SEED": "train.seed",
    "SURFRECON_WORKERS": "train.workers",
    "SURFRECON_LOG_LEVEL": "logging.level",
}


def read_config_file(path: Path) -> dict[str, Any]:
    """Read a YAML or ``key = value`` config file into a nested dict.

    Args:
        path: ``.yaml``/``.yml`` files are parsed as YAML; anything else is
            parsed as sectioned ``key = value`` text with ``#`` comments.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: If the file cannot be parsed.
    """
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Top level of {path} must be a mapping")
        return data

    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"Invalid config file {path}: {e}") from e

    data: dict[str, Any] = {}
    for section in parser.sections():
        data[section] = {key: _parse_value(raw) for key, raw in parser.items(section)}
    return data


def _parse_value(raw: str) -> Any:
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``section.key=value`` overrides in place.

    Raises:
        ConfigError: If an override is not of the form ``section.key=value``.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like section.key=value, got '{item}'")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) == 1 and parts[0] == "preset":
            data["preset"] = raw.strip()
            continue
        if len(parts) != 2:
            raise ConfigError(f"Override key must be section.key, got '{dotted}'")
        section, key = parts
        target = data.setdefault(section, {})
        if not isinstance(target, dict):
            raise ConfigError(f"'{section}' is not a config section")
        target[key] = _parse_value(raw.strip())
    return data


def _merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_settings(data: dict[str, Any]) -> Settings:
    """Validate a nested dict into ``Settings``, applying the large preset first.

    Raises:
        ConfigError: If validation fails (including unknown keys).
    """
    if data.get("preset") == "large":
        data = _merge(LARGE_PRESET, data)
    try:
        return Settings(**data)
    except ValidationError as e:
        raise ConfigError(f"Config validation failed: {e}") from e


def load_config(
    config_path: str | Path | None = None,
    overrides: Optional[list[str]] = None,
) -> Settings:
    """Load configuration from a file, environment variables and overrides.

    Args:
        config_path: Path to a config file. If None, uses config/settings.yaml
            when present, otherwise built-in defaults.
        overrides: ``section.key=value`` strings applied last.

    Returns:
        Settings object with loaded configuration.

    Raises:
        FileNotFoundError: If an explicit config file is not found.
        ConfigError: If config validation fails.

    Example:
        >>> settings = load_config(overrides=["train.total_iters=200"])
        >>> settings.train.boundaries()
        (33, 100)
    """
    load_dotenv()

    if config_path is None:
        project_root = Path(__file__).parent.parent.parent
        default_path = project_root / "config" / "settings.yaml"
        data = read_config_file(default_path) if default_path.exists() else {}
    else:
        data = read_config_file(Path(config_path))

    env_items = [
        f"{dotted}={os.environ[name]}" for name, dotted in ENV_OVERRIDES.items() if os.getenv(name)
    ]
    apply_overrides(data, env_items)
    apply_overrides(data, overrides or [])

    return build_settings(data)
