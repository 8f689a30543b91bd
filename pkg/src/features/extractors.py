"""Per-view feature extractors.

Two interchangeable implementations sit behind ``FeatureExtractor``:

* ``PyramidFeatureExtractor``: deterministic hand-crafted features built
  with ``scipy.ndimage``.
* ``FileFeatureImporter``: reads precomputed per-view feature stacks, so
  features from an external network can be plugged in.

Pyramid channel layout (frozen)::

    0-14   luminance Y = 0.299 r + 0.587 g + 0.114 b; for scales 1, 1/2, 1/4 (scale-major):
           [Y, d/dx Y, d/dy Y, 3x3 mean of Y, 3x3 std of Y]
    15-16  rg chromaticity r/(r+g+b), g/(r+g+b) at full scale
    17-31  the same five features of the blue-yellow opponent signal b - (r+g)/2

Coarse scales are box-downsampled by 2 per level and upsampled back
bilinearly. Every channel is standardized to zero mean and unit variance
over the image, with the variance floored at ``variance_floor``.
"""

import logging
import struct
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage

from src.features.sampling import FeatureMap
from src.utils.config import FeatureConfig
from src.utils.errors import ConfigError, DatasetParseError, RejectedInputError

logger = logging.getLogger(__name__)

PYRAMID_CHANNELS = 32
PYRAMID_LEVELS = 3
FEATURE_MAGIC = b"SRFT"
_HEADER = struct.Struct("<4sIII")
_CHROMA_EPS = 1e-6

Image = NDArray[np.float64]


class FeatureExtractor(ABC):
    """Base class for all feature extractors."""

    name: str = "base"

    def __init__(self, channels: int, variance_floor: float = 1e-6) -> None:
        self.channels = channels
        self.variance_floor = variance_floor

    @abstractmethod
    def extract(self, image: Image, view: int = 0) -> FeatureMap:
        """Feature map for ``image`` (H, W, 3) in [0, 1] belonging to ``view``."""
        pass


def _resize(channel: Image, shape: tuple[int, int]) -> Image:
    if channel.shape == shape:
        return channel
    factors = (shape[0] / channel.shape[0], shape[1] / channel.shape[1])
    out = ndimage.zoom(channel, factors, order=1, mode="nearest", grid_mode=True)
    out = out[: shape[0], : shape[1]]
    pad = ((0, shape[0] - out.shape[0]), (0, shape[1] - out.shape[1]))
    return np.pad(out, pad, mode="edge") if any(p[1] for p in pad) else out


def _downsample(signal: Image) -> Image:
    return ndimage.uniform_filter(signal, size=2, mode="nearest")[::2, ::2]


def _five_features(signal: Image) -> list[Image]:
    mean = ndimage.uniform_filter(signal, size=3, mode="nearest")
    mean_sq = ndimage.uniform_filter(signal * signal, size=3, mode="nearest")
    return [
        signal,
        ndimage.sobel(signal, axis=1, mode="nearest") / 8.0,
        ndimage.sobel(signal, axis=0, mode="nearest") / 8.0,
        mean,
        np.sqrt(np.maximum(mean_sq - mean * mean, 0.0)),
    ]


def _pyramid_features(signal: Image) -> list[Image]:
    shape = signal.shape
    channels: list[Image] = []
    level = signal
    for depth in range(PYRAMID_LEVELS):
        if depth > 0:
            level = _downsample(level)
        channels.extend(_resize(c, shape) for c in _five_features(level))  # type: ignore[arg-type]
    return channels


class PyramidFeatureExtractor(FeatureExtractor):
    """Deterministic multi-scale gradient and local-statistics features."""

    name = "pyramid"

    def __init__(self, channels: int = PYRAMID_CHANNELS, variance_floor: float = 1e-6) -> None:
        if not 1 <= channels <= PYRAMID_CHANNELS:
            raise ConfigError(
                f"pyramid extractor provides 1..{PYRAMID_CHANNELS} channels, got {channels}"
            )
        super().__init__(channels, variance_floor)

    def extract(self, image: Image, view: int = 0) -> FeatureMap:
        rgb = np.asarray(image, dtype=np.float64)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise RejectedInputError(f"expected an (H, W, 3) image, got shape {rgb.shape}")
        r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
        luminance = 0.299 * r + 0.587 * g + 0.114 * b
        opponent = b - 0.5 * (r + g)
        total = r + g + b + _CHROMA_EPS

        channels = _pyramid_features(luminance)
        channels += [r / total, g / total]
        channels += _pyramid_features(opponent)
        stack = np.stack(channels[: self.channels], axis=-1)
        return FeatureMap(standardize(stack, self.variance_floor))


def standardize(stack: Image, variance_floor: float) -> Image:
    """Zero-mean, unit-variance channels, variance floored at ``variance_floor``."""
    mean = stack.mean(axis=(0, 1), keepdims=True)
    centered = stack - mean
    var = (centered * centered).mean(axis=(0, 1), keepdims=True)
    out: Image = centered / np.sqrt(np.maximum(var, variance_floor))
    return out


def write_feature_file(path: str | Path, fmap: FeatureMap) -> Path:
    """Write a feature stack: header (magic, W, H, C) then C x H x W float32, little-endian."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(FEATURE_MAGIC, fmap.width, fmap.height, fmap.channels)
    body = np.ascontiguousarray(np.moveaxis(fmap.data, -1, 0), dtype="<f4").tobytes()
    target.write_bytes(header + body)
    return target


def read_feature_file(path: str | Path) -> FeatureMap:
    """Read a feature stack written by ``write_feature_file`` or an external tool.

    Raises:
        DatasetParseError: On a bad magic, truncated data or trailing bytes.
    """
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise DatasetParseError(str(source), f"cannot read feature file: {e}") from e
    if len(data) < _HEADER.size:
        raise DatasetParseError(str(source), "truncated header", offset=len(data))
    magic, width, height, channels = _HEADER.unpack_from(data)
    if magic != FEATURE_MAGIC:
        raise DatasetParseError(str(source), f"bad magic {magic!r}", offset=0)
    expected = width * height * channels * 4
    body = data[_HEADER.size :]
    if len(body) < expected:
        raise DatasetParseError(
            str(source), f"expected {expected} data bytes, found {len(body)}", offset=len(data)
        )
    if len(body) > expected:
        raise DatasetParseError(
            str(source), "trailing bytes after data", offset=_HEADER.size + expected
        )
    stack = np.frombuffer(body, dtype="<f4").reshape(channels, height, width)
    return FeatureMap(np.moveaxis(stack, 0, -1))


class FileFeatureImporter(FeatureExtractor):
    """Loads ``view_%03d.feat`` stacks from a directory."""

    name = "file"

    def __init__(
        self, feature_dir: str | Path, channels: int, variance_floor: float = 1e-6
    ) -> None:
        super().__init__(channels, variance_floor)
        self.feature_dir = Path(feature_dir)

    def path_for(self, view: int) -> Path:
        return self.feature_dir / f"view_{view:03d}.feat"

    def extract(self, image: Image, view: int = 0) -> FeatureMap:
        path = self.path_for(view)
        fmap = read_feature_file(path)
        if fmap.channels != self.channels:
            raise DatasetParseError(
                str(path), f"expected {self.channels} channels, found {fmap.channels}"
            )
        height, width = np.asarray(image).shape[:2]
        if (fmap.height, fmap.width) != (height, width):
            raise DatasetParseError(
                str(path), f"feature size {fmap.width}x{fmap.height} != image size {width}x{height}"
            )
        logger.debug("Imported features for view %d from %s", view, path)
        return fmap


def create_extractor(
    cfg: FeatureConfig, feature_dir: Optional[str | Path] = None
) -> FeatureExtractor:
    """Build the extractor selected by ``cfg.extractor``.

    Raises:
        ConfigError: If the file importer is selected without a directory.
    """
    if cfg.extractor == "file":
        directory = feature_dir or cfg.feature_dir
        if directory is None:
            raise ConfigError("features.extractor = file needs features.feature_dir")
        return FileFeatureImporter(directory, cfg.channels, cfg.variance_floor)
    return PyramidFeatureExtractor(cfg.channels, cfg.variance_floor)


def extract_features(image: Image, cfg: Optional[FeatureConfig] = None) -> FeatureMap:
    """Pyramid features of one image."""
    cfg = cfg or FeatureConfig()
    return PyramidFeatureExtractor(cfg.channels, cfg.variance_floor).extract(image)
