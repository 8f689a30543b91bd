"""Cameras, feature extraction and differentiable cross-view sampling."""

from .camera import Camera, pixel_directions, project, project_points
from .extractors import (
    FeatureExtractor,
    FileFeatureImporter,
    PyramidFeatureExtractor,
    create_extractor,
    extract_features,
    read_feature_file,
    write_feature_file,
)
from .sampling import FeatureMap, bilinear_sample
from .views import select_source_views, source_view_table

__all__ = [
    "Camera",
    "FeatureExtractor",
    "FeatureMap",
    "FileFeatureImporter",
    "PyramidFeatureExtractor",
    "bilinear_sample",
    "create_extractor",
    "extract_features",
    "pixel_directions",
    "project",
    "project_points",
    "read_feature_file",
    "select_source_views",
    "source_view_table",
    "write_feature_file",
]
