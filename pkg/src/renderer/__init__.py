"""Ray generation, sample placement and SDF volume rendering."""

from .bias_analysis import (
    BiasReport,
    analyze_ray_bias,
    linear_profile,
    parse_profile,
    piecewise_profile,
)
from .rays import Ray, RayBatch, camera_rays, image_rays, pixel_ray, sphere_near_far
from .sampling import (
    merge_sorted,
    place_samples,
    sample_hierarchical,
    sample_pdf,
    stratified,
    up_sample_weights,
)
from .volume import (
    SHARPNESS_PARAM,
    Composite,
    RaySamples,
    SharpnessParam,
    alphas_and_weights,
    composite,
    fill_samples,
)

__all__ = [
    "BiasReport",
    "Composite",
    "Ray",
    "RayBatch",
    "RaySamples",
    "SHARPNESS_PARAM",
    "SharpnessParam",
    "alphas_and_weights",
    "analyze_ray_bias",
    "camera_rays",
    "composite",
    "fill_samples",
    "image_rays",
    "linear_profile",
    "merge_sorted",
    "parse_profile",
    "piecewise_profile",
    "pixel_ray",
    "place_samples",
    "sample_hierarchical",
    "sample_pdf",
    "sphere_near_far",
    "stratified",
    "up_sample_weights",
]
