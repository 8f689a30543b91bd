"""Analytic scenes, reference rendering and dataset files."""

from .dataset import (
    SceneDataset,
    format_cameras,
    load_dataset,
    parse_cameras,
    read_image,
    read_mask,
    read_points,
    write_dataset,
    write_gray,
    write_image,
    write_mask,
)
from .generate import make_scene, sample_surface_points
from .library import SCENES, get_scene
from .render import Shading, ValueNoise, render_ground_truth, sphere_trace
from .rig import generate_rig
from .sdf import (
    AnalyticSDF,
    Box,
    Empty,
    Intersection,
    Plane,
    Scale,
    SmoothUnion,
    Sphere,
    Torus,
    Translate,
    Union,
    sdf_eval,
)

__all__ = [
    "AnalyticSDF",
    "Box",
    "Empty",
    "Intersection",
    "Plane",
    "SCENES",
    "Scale",
    "SceneDataset",
    "Shading",
    "SmoothUnion",
    "Sphere",
    "Torus",
    "Translate",
    "Union",
    "ValueNoise",
    "format_cameras",
    "generate_rig",
    "get_scene",
    "load_dataset",
    "make_scene",
    "parse_cameras",
    "read_image",
    "read_mask",
    "read_points",
    "render_ground_truth",
    "sample_surface_points",
    "sdf_eval",
    "sphere_trace",
    "write_dataset",
    "write_gray",
    "write_image",
    "write_mask",
]
