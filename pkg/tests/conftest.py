"""Pytest configuration and shared fixtures."""

import copy
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest

# Add the project root to the path so that ``src`` imports resolve
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.scene.dataset import write_dataset  # noqa: E402
from src.scene.generate import make_scene  # noqa: E402
from src.utils.config import Settings, build_settings  # noqa: E402

# Small enough for a full training step to run in well under a second
TINY_CONFIG: dict[str, Any] = {
    "encoding": {"num_freqs_position": 2, "num_freqs_direction": 1},
    "geometry": {"n_layers": 2, "width": 16, "skip_layers": [1], "feature_dim": 4},
    "radiance": {"n_layers": 1, "width": 16},
    "render": {"n_coarse": 8, "n_fine": 8, "up_sample_steps": 2, "chunk_rays": 32},
    "features": {"channels": 8},
    "scene": {"name": "sphere", "n_views": 4, "resolution": 12, "gt_samples": 400},
    "mesh": {"resolution": 24, "slab_size": 8, "sample_points": 400},
    "train": {
        "rays_per_iter": 48,
        "total_iters": 6,
        "warmup_iters": 2,
        "ckpt_every": 3,
        "log_every": 2,
    },
}


def tiny_config(**sections: dict[str, Any]) -> dict[str, Any]:
    """``TINY_CONFIG`` with per-section updates merged in."""
    data = copy.deepcopy(TINY_CONFIG)
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return data


@pytest.fixture
def project_root() -> Path:
    """Return the project root directory."""
    return PROJECT_ROOT


@pytest.fixture
def tiny_settings() -> Settings:
    """Settings with tiny networks, few samples and a six-iteration schedule."""
    return build_settings(tiny_config())


@pytest.fixture(scope="session")
def sphere_dataset_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """A four-view 12x12 sphere dataset written once per session."""
    settings = build_settings(tiny_config())
    root = tmp_path_factory.mktemp("sphere_dataset")
    write_dataset(root, make_scene(settings.scene))
    return root


@pytest.fixture
def temp_config_file(tmp_path: Path) -> Path:
    """Create a temporary YAML config file for testing."""
    config_file = tmp_path / "test_settings.yaml"
    config_file.write_text(
        """
render:
  n_coarse: 16
  perturb: false

train:
  total_iters: 120
  mode: "bias"

logging:
  level: "DEBUG"
  format: "json"
"""
    )
    return config_file


def central_difference(
    fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-6
) -> np.ndarray:
    """Numerical gradient of a scalar function by central differences in float64."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        plus, minus = x.copy(), x.copy()
        plus[idx] += step
        minus[idx] -= step
        grad[idx] = (fn(plus) - fn(minus)) / (2.0 * step)
    return grad


@pytest.fixture
def numeric_gradient() -> Callable[..., np.ndarray]:
    return central_difference
