"""Training runs: data preparation, the iteration loop, metrics and checkpoints."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from src.features.extractors import create_extractor
from src.features.views import source_view_table
from src.fields.checkpoint import read_checkpoint, write_checkpoint
from src.scene.dataset import SceneDataset, load_dataset
from src.trainer.evaluate import psnr, render_view
from src.trainer.model import Arrays, FieldModel
from src.trainer.optimizer import OptimState
from src.trainer.schedule import lr_and_weights
from src.trainer.step import TrainingData, train_step
from src.utils.config import Settings
from src.utils.errors import RejectedInputError
from src.utils.logger import log_structured

logger = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "iter",
    "lr",
    "alpha",
    "beta",
    "gamma",
    "color",
    "eikonal",
    "bias",
    "feature",
    "total",
    "valid_hit_fraction",
    "s",
)
METRICS_FILE = "metrics.csv"
FINAL_CHECKPOINT = "final.ckpt"
CHECKPOINT_PATTERN = "ckpt_{:06d}.ckpt"


@dataclass
class TrainingResult:
    """Artifacts of a finished run."""

    final_checkpoint: Path
    metrics_path: Path
    iterations: int
    validation_psnr: dict[int, float] = field(default_factory=dict)


def prepare_data(settings: Settings, dataset: SceneDataset) -> TrainingData:
    """Feature maps for every view, the source-view table and the training views.

    Raises:
        RejectedInputError: If a held-out view does not exist or no view is left.
    """
    holdout = set(settings.train.holdout_views)
    unknown = sorted(v for v in holdout if not 0 <= v < dataset.n_views)
    if unknown:
        raise RejectedInputError(f"held-out views {unknown} outside 0..{dataset.n_views - 1}")

    extractor = create_extractor(settings.features)
    feature_maps = [extractor.extract(image, view=i) for i, image in enumerate(dataset.images)]
    table = source_view_table(dataset.cameras, settings.features.n_source_views)
    train_views = [v for v in range(dataset.n_views) if v not in holdout]
    logger.info(
        "Prepared %d views (%d for training), %d feature channels",
        dataset.n_views,
        len(train_views),
        feature_maps[0].channels,
    )
    return TrainingData(dataset, feature_maps, table, train_views)


def _format(value: float) -> str:
    return repr(float(value))


class MetricsWriter:
    """Per-iteration metrics CSV; on resume, rows from the resumed iteration onward are dropped."""

    def __init__(self, path: Path, start: int) -> None:
        self.path = path
        header = ",".join(METRIC_COLUMNS) + "\n"
        kept: list[str] = []
        if start > 0 and path.exists():
            lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
            kept = [
                line for line in lines[1:] if line.strip() and int(line.split(",", 1)[0]) < start
            ]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(header + "".join(kept), encoding="utf-8")

    def append(self, row: dict[str, float]) -> None:
        values = [str(int(row["iter"]))] + [_format(row[c]) for c in METRIC_COLUMNS[1:]]
        with self.path.open("a", encoding="utf-8", newline="") as handle:
            handle.write(",".join(values) + "\n")


def read_metrics(path: str | Path) -> list[dict[str, float]]:
    """Parse a metrics CSV written by ``MetricsWriter``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    columns = lines[0].split(",")
    return [dict(zip(columns, (float(v) for v in line.split(",")))) for line in lines[1:] if line]


def validate(
    model: FieldModel, params: Arrays, dataset: SceneDataset, views: list[int]
) -> dict[int, float]:
    """PSNR of rendered views against the dataset images."""
    scores: dict[int, float] = {}
    for view in views:
        rendered = render_view(model, params, dataset.cameras[view])
        scores[view] = psnr(rendered.image, dataset.images[view])
    return scores


def run_training(
    settings: Settings,
    dataset_dir: str | Path,
    out_dir: str | Path,
    resume: Optional[str | Path] = None,
) -> TrainingResult:
    """Train for ``train.total_iters`` iterations and write checkpoints and metrics.

    A run resumed from a checkpoint continues at its stored iteration with
    the stored optimizer moments; since every iteration derives its random
    draws from ``(seed, iteration)``, a single-worker resumed run matches an
    uninterrupted one exactly.

    Args:
        settings: Run configuration.
        dataset_dir: Directory written by ``make-scene``.
        out_dir: Receives the metrics CSV and checkpoints.
        resume: Checkpoint to continue from.

    Raises:
        DatasetParseError: If the dataset cannot be read.
        CheckpointError: If the resume checkpoint is malformed.
        TrainingAbortError: If a loss part or gradient becomes non-finite.
    """
    out = Path(out_dir)
    cfg = settings.train
    dataset = load_dataset(dataset_dir)
    data = prepare_data(settings, dataset)
    model = FieldModel.from_settings(settings)

    if resume is not None:
        ckpt = read_checkpoint(resume)
        params = model.params_from(ckpt)
        state = OptimState.from_checkpoint(ckpt, params)
        start = ckpt.iteration
        if start > cfg.total_iters:
            raise RejectedInputError(
                f"checkpoint iteration {start} beyond total_iters={cfg.total_iters}"
            )
        logger.info("Resuming from %s at iteration %d", resume, start)
    else:
        params = model.init_params(cfg.seed)
        state = OptimState.zeros(params)
        start = 0

    metrics = MetricsWriter(out / METRICS_FILE, start)
    log_structured(
        logger,
        logging.INFO,
        "Training started",
        scene=settings.scene.name,
        mode=cfg.mode,
        seed=cfg.seed,
        start=start,
        total_iters=cfg.total_iters,
        rays_per_iter=cfg.rays_per_iter,
    )

    stage: Optional[int] = None
    for iteration in range(start, cfg.total_iters):
        schedule = lr_and_weights(iteration, cfg)
        if schedule.stage != stage:
            if stage is not None:
                logger.info(
                    "Stage %d begins at iteration %d (beta=%g, gamma=%g)",
                    schedule.stage,
                    iteration,
                    schedule.weights.beta,
                    schedule.weights.gamma,
                )
            stage = schedule.stage

        s = model.inv_std(params)
        params, state, bundle = train_step(model, params, state, data, iteration, cfg.workers)
        row = {
            "iter": iteration,
            "lr": schedule.lr,
            "alpha": bundle.weights.alpha,
            "beta": bundle.weights.beta,
            "gamma": bundle.weights.gamma,
            "color": bundle.color,
            "eikonal": bundle.eikonal,
            "bias": bundle.bias,
            "feature": bundle.feature,
            "total": bundle.total,
            "valid_hit_fraction": bundle.valid_hit_fraction,
            "s": s,
        }
        metrics.append(row)
        if iteration % cfg.log_every == 0 or iteration == cfg.total_iters - 1:
            log_structured(logger, logging.INFO, "Training step", **row)

        done = iteration + 1
        if done % cfg.ckpt_every == 0 and done < cfg.total_iters:
            extra = state.to_tensors()
            ckpt = model.checkpoint(params, done, extra)
            write_checkpoint(out / CHECKPOINT_PATTERN.format(done), ckpt)

    final = write_checkpoint(
        out / FINAL_CHECKPOINT, model.checkpoint(params, cfg.total_iters, state.to_tensors())
    )

    scores = validate(model, params, dataset, sorted(set(cfg.holdout_views)))
    for view, score in scores.items():
        log_structured(logger, logging.INFO, "Validation", view=view, psnr=score)
    if scores:
        logger.info("Mean validation PSNR %.3f dB", float(np.mean(list(scores.values()))))

    return TrainingResult(final, out / METRICS_FILE, cfg.total_iters, scores)
