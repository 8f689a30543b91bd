"""One optimization step over a batch of rays.

The batch is split into chunks of ``render.chunk_rays`` rays. A cheap
sampling pass (no tape) places the samples of every chunk and counts the
rays, points and surface hits of the whole batch; each chunk then records
its own tape, builds its share of the objective with those batch-wide
divisors and is differentiated on its own. Chunk gradients are summed in
chunk order, so the update does not depend on the worker count.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from src.autodiff.tape import Tape
from src.features.camera import Camera
from src.features.sampling import FeatureMap
from src.fields.networks import geometry_forward, radiance_forward
from src.losses.bundle import PARTS, LossBundle, StageWeights, total_loss, weighted_objective
from src.losses.crossing import find_zero_crossing
from src.losses.terms import bias_loss, color_loss, eikonal_loss, feature_loss
from src.renderer.rays import RayBatch, camera_rays
from src.renderer.sampling import place_samples
from src.renderer.volume import composite, fill_samples
from src.scene.dataset import SceneDataset
from src.trainer.model import Arrays, FieldModel
from src.trainer.optimizer import OptimState, adam_step
from src.trainer.schedule import lr_and_weights
from src.utils.errors import RejectedInputError

logger = logging.getLogger(__name__)


@dataclass
class TrainingData:
    """Dataset views with precomputed feature maps and source views."""

    dataset: SceneDataset
    feature_maps: list[FeatureMap]
    source_views: list[list[int]]
    train_views: list[int]
    _offsets: NDArray[np.int64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.train_views:
            raise RejectedInputError("no training views left after holding out")
        cams = self.dataset.cameras
        sizes = [cams[v].width * cams[v].height for v in self.train_views]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @property
    def n_pixels(self) -> int:
        return int(self._offsets[-1])

    @property
    def cameras(self) -> list[Camera]:
        return self.dataset.cameras

    def locate(self, flat: NDArray[np.int64]) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
        """View index and ``(column, row)`` pixel of flat indices over all training pixels."""
        slot = np.searchsorted(self._offsets, flat, side="right") - 1
        views = np.asarray(self.train_views, dtype=np.intp)[slot]
        local = flat - self._offsets[slot]
        widths = np.array([self.cameras[v].width for v in views], dtype=np.int64)
        pixels = np.stack([local % widths, local // widths], axis=-1).astype(np.intp)
        return views, pixels


@dataclass
class RayPick:
    """Rays of one iteration with their supervision."""

    rays: RayBatch
    views: NDArray[np.intp]
    pixels: NDArray[np.intp]
    colors: NDArray[np.float64]
    jitter: Optional[NDArray[np.float64]]

    def chunk(self, index: slice) -> "RayPick":
        return RayPick(
            rays=self.rays.select(index),
            views=self.views[index],
            pixels=self.pixels[index],
            colors=self.colors[index],
            jitter=None if self.jitter is None else self.jitter[index],
        )


def sample_rays(data: TrainingData, model: FieldModel, iteration: int) -> RayPick:
    """Uniform draw over all (training view, pixel) pairs, seeded by ``(seed, iteration)``."""
    train = model.settings.train
    render = model.settings.render
    rng = np.random.default_rng([train.seed, iteration])
    flat = rng.integers(0, data.n_pixels, size=train.rays_per_iter)
    views, pixels = data.locate(flat)
    jitter = rng.random((train.rays_per_iter, render.n_coarse)) if render.perturb else None

    batches = []
    for view in np.unique(views):
        rows = np.flatnonzero(views == view)
        batches.append((rows, camera_rays(data.cameras[view], pixels[rows], render.bound_radius)))
    order = np.concatenate([rows for rows, _ in batches])
    rays = RayBatch.concatenate([b for _, b in batches]).select(np.argsort(order, kind="stable"))
    colors = np.stack([data.dataset.images[v][p[1], p[0]] for v, p in zip(views, pixels)])
    return RayPick(rays=rays, views=views, pixels=pixels, colors=colors, jitter=jitter)


@dataclass
class _ChunkPlan:
    pick: RayPick
    t: NDArray[np.float64]


@dataclass
class _ChunkResult:
    grads: Arrays
    parts: dict[str, float]
    n_valid: int


def _plan(model: FieldModel, params: Arrays, pick: RayPick) -> tuple[_ChunkPlan, int]:
    """Place samples without a tape and count the rays with a usable surface point."""
    render = model.settings.render
    t, sdf = place_samples(pick.rays, model.sdf_field(params), render, pick.jitter)
    samples = fill_samples(t, pick.rays.origins, pick.rays.directions, sdf, model.inv_std(params))
    colors = np.zeros(t.shape + (3,))
    has_weight = composite(samples, colors, weight_eps=render.weight_eps).has_weight
    valid = find_zero_crossing(samples).valid
    return _ChunkPlan(pick, t), int(np.count_nonzero(has_weight & valid))


def _run_chunk(
    model: FieldModel,
    params: Arrays,
    plan: _ChunkPlan,
    data: TrainingData,
    weights: StageWeights,
    divisors: dict[str, float],
) -> _ChunkResult:
    render = model.settings.render
    tape = Tape()
    bound = model.bind(tape, params)
    rays = plan.pick.rays
    t = plan.t

    points = rays.origins[:, None, :] + t[..., None] * rays.directions[:, None, :]
    geo = geometry_forward(model.geometry, bound, points)
    view_dirs = np.broadcast_to(rays.directions[:, None, :], points.shape)
    colors = radiance_forward(model.radiance, bound, points, view_dirs, geo.normal, geo.z)
    s = model.sharpness.inv_std(bound[model.sharpness.name])
    samples = fill_samples(t, rays.origins, rays.directions, geo.sdf, s)
    result = composite(samples, colors, render.background, render.weight_eps, anchor=render.anchor)
    hit = find_zero_crossing(samples)
    members = result.has_weight & hit.valid

    x_rendered = result.x_rendered
    if model.settings.train.detach_rendered_point:
        x_rendered = x_rendered.detach()

    def field(x: object) -> object:
        return model.geometry.sdf(bound, x)

    parts = {
        "color": color_loss(result.color, plan.pick.colors, divisors["rays"]),
        "eikonal": eikonal_loss(geo.normal, divisors["points"]),
    }
    # zero-weight terms are not recorded on the tape and report 0
    if weights.beta != 0.0:
        parts["bias"] = bias_loss(
            field, x_rendered, members, divisors["members"]  # type: ignore[arg-type]
        )
    if weights.gamma != 0.0:
        parts["feature"] = feature_loss(
            hit,
            members,
            plan.pick.views,
            plan.pick.pixels,
            data.feature_maps,
            data.cameras,
            data.source_views,
            divisors["members"],
        )
    objective = weighted_objective(parts, weights)
    adjoints = tape.backward(objective)
    grads = {name: adjoints.of(leaf) for name, leaf in bound.items()}
    values = {k: parts[k].item() if k in parts else 0.0 for k in PARTS}
    return _ChunkResult(grads, values, int(np.count_nonzero(members)))


def train_step(
    model: FieldModel,
    params: Arrays,
    state: OptimState,
    data: TrainingData,
    iteration: int,
    workers: int = 1,
) -> tuple[Arrays, OptimState, LossBundle]:
    """Sample a batch, evaluate every loss and apply one Adam update.

    Raises:
        TrainingAbortError: If a loss part or a gradient is not finite.
    """
    schedule = lr_and_weights(iteration, model.settings.train)
    pick = sample_rays(data, model, iteration)
    chunk = model.settings.render.chunk_rays
    picks = [pick.chunk(slice(i, i + chunk)) for i in range(0, len(pick.rays), chunk)]

    planned = [_plan(model, params, p) for p in picks]
    n_rays = len(pick.rays)
    n_members = sum(count for _, count in planned)
    n_samples = sum(p.t.size for p, _ in planned)
    divisors = {
        "rays": float(n_rays),
        "points": float(n_samples),
        "members": float(max(n_members, 1)),
    }

    def run(plan: _ChunkPlan) -> _ChunkResult:
        return _run_chunk(model, params, plan, data, schedule.weights, divisors)

    if workers > 1 and len(planned) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, [p for p, _ in planned]))
    else:
        results = [run(p) for p, _ in planned]

    grads = {name: np.zeros_like(value) for name, value in params.items()}
    parts = {name: 0.0 for name in results[0].parts}
    for r in results:
        for name in grads:
            grads[name] = grads[name] + r.grads[name]
        for name in parts:
            parts[name] += r.parts[name]

    bundle = total_loss(parts, schedule.weights, iteration, n_rays, sum(r.n_valid for r in results))
    new_params, new_state = adam_step(params, grads, state, schedule.lr, iteration=iteration)
    return new_params, new_state, bundle
