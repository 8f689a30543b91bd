"""Optimization of the geometry and radiance fields."""

from .evaluate import RenderedView, depth_to_image, normals_to_image, psnr, render_view
from .loop import METRIC_COLUMNS, TrainingResult, prepare_data, read_metrics, run_training, validate
from .model import FieldModel, load_model
from .optimizer import OptimState, adam_step
from .schedule import ScheduleStep, WarmupCosine, lr_and_weights, mode_weights, stage_of
from .step import RayPick, TrainingData, sample_rays, train_step

__all__ = [
    "FieldModel",
    "METRIC_COLUMNS",
    "OptimState",
    "RayPick",
    "RenderedView",
    "ScheduleStep",
    "TrainingData",
    "TrainingResult",
    "WarmupCosine",
    "adam_step",
    "depth_to_image",
    "load_model",
    "lr_and_weights",
    "mode_weights",
    "normals_to_image",
    "prepare_data",
    "psnr",
    "read_metrics",
    "render_view",
    "run_training",
    "sample_rays",
    "stage_of",
    "train_step",
    "validate",
]
