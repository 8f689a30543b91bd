"""
Ablation Runs and Reports

Trains every loss mode for every seed on one dataset, extracts and scores
the meshes, and summarizes the results as a CSV table and a Markdown
report rendered from a Jinja2 template.
"""

import logging
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader
from pydantic import BaseModel, Field

from src.fields.checkpoint import read_checkpoint
from src.mesher.extract import extract_mesh
from src.mesher.mesh import write_mesh
from src.mesher.metrics import ChamferResult, chamfer_l1, sample_surface
from src.scene.dataset import load_dataset
from src.trainer.loop import run_training
from src.trainer.model import load_model
from src.utils.config import Settings
from src.utils.errors import RejectedInputError
from src.utils.logger import log_structured

logger = logging.getLogger(__name__)

MODES = ("baseline", "bias", "feature", "full")
SUMMARY_COLUMNS = ("mode", "seed", "accuracy", "completeness", "chamfer", "psnr")


class AblationRow(BaseModel):
    """Scores of one trained (mode, seed) pair; NaN where nothing could be measured."""

    mode: str
    seed: int
    accuracy: float = math.nan
    completeness: float = math.nan
    chamfer: float = math.nan
    psnr: Optional[float] = None

    def csv_row(self) -> str:
        psnr = "" if self.psnr is None else repr(self.psnr)
        scores = f"{self.accuracy!r},{self.completeness!r},{self.chamfer!r}"
        return f"{self.mode},{self.seed},{scores},{psnr}"


class AblationSummary(BaseModel):
    """All rows of one ablation on one scene."""

    scene: str
    rows: list[AblationRow] = Field(default_factory=list)

    def modes(self) -> list[str]:
        return [m for m in MODES if any(r.mode == m for r in self.rows)]

    def mean(self, mode: str, metric: str = "chamfer") -> float:
        values = [getattr(r, metric) for r in self.rows if r.mode == mode]
        values = [v for v in values if v is not None and math.isfinite(v)]
        return float(np.mean(values)) if values else math.nan

    def relative_change(self, mode: str, reference: str = "baseline") -> float:
        """Change of mean Chamfer against ``reference``; negative is better."""
        base = self.mean(reference)
        if not math.isfinite(base) or base == 0.0:
            return math.nan
        return (self.mean(mode) - base) / base

    def write_csv(self, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(SUMMARY_COLUMNS)] + [r.csv_row() for r in self.rows]
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return target


class ReportGenerator:
    """Renders an ``AblationSummary`` to Markdown."""

    def __init__(self, template_dir: Optional[str | Path] = None):
        if template_dir is None:
            template_dir = Path(__file__).parent / "templates"
        self.template_dir = Path(template_dir)
        self.env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["fixed"] = self._fixed
        self.env.filters["percent"] = self._percent

    def render(self, summary: AblationSummary) -> str:
        template = self.env.get_template("ablation.md.jinja2")
        means = [
            {
                "mode": mode,
                "chamfer": summary.mean(mode),
                "accuracy": summary.mean(mode, "accuracy"),
                "completeness": summary.mean(mode, "completeness"),
                "psnr": summary.mean(mode, "psnr"),
                "change": summary.relative_change(mode),
            }
            for mode in summary.modes()
        ]
        return template.render(summary=summary, means=means)

    def generate_report(self, summary: AblationSummary, output_path: str | Path) -> str:
        """Write the report and return its path."""
        target = Path(output_path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(self.render(summary), encoding="utf-8")
        return str(target)

    @staticmethod
    def _fixed(value: Optional[float], digits: int = 4) -> str:
        if value is None or not math.isfinite(value):
            return "n/a"
        return f"{value:.{digits}f}"

    @staticmethod
    def _percent(value: float) -> str:
        if not math.isfinite(value):
            return "n/a"
        return f"{100.0 * value:+.1f}%"


def score_checkpoint(
    ckpt_path: str | Path, gt_points: np.ndarray, workers: int = 1
) -> tuple[ChamferResult, Path]:
    """Extract the mesh of a checkpoint next to it and score it against ``gt_points``.

    Raises:
        RejectedInputError: If the extracted mesh is empty or no ground-truth
            points are available.
    """
    model, params = load_model(read_checkpoint(ckpt_path))
    mesh = extract_mesh(model.sdf_field(params), model.settings.mesh, workers)
    mesh_path = write_mesh(mesh, Path(ckpt_path).with_suffix(".obj"))
    if mesh.is_empty:
        raise RejectedInputError(f"mesh extracted from {ckpt_path} is empty")
    pred = sample_surface(mesh, model.settings.mesh.sample_points, model.settings.train.seed)
    return chamfer_l1(pred, gt_points), mesh_path


def run_ablation(
    settings: Settings,
    dataset_dir: str | Path,
    out_dir: str | Path,
    seeds: Sequence[int] = (0,),
    modes: Sequence[str] = MODES,
) -> AblationSummary:
    """Train, extract and score every (mode, seed) pair one after another.

    Each run lives in ``out_dir/<mode>_seed<seed>``; the summary is written
    to ``ablation.csv`` and ``ablation.md`` in ``out_dir``.
    """
    unknown = [m for m in modes if m not in MODES]
    if unknown:
        raise RejectedInputError(f"unknown ablation modes {unknown}; expected {list(MODES)}")
    out = Path(out_dir)
    gt_points = load_dataset(dataset_dir).gt_points
    summary = AblationSummary(scene=settings.scene.name)

    for mode in modes:
        for seed in seeds:
            train = settings.train.model_copy(update={"mode": mode, "seed": seed})
            run_settings = settings.model_copy(update={"train": train})
            run_dir = out / f"{mode}_seed{seed}"
            result = run_training(run_settings, dataset_dir, run_dir)
            row = AblationRow(mode=mode, seed=seed)
            if result.validation_psnr:
                row.psnr = float(np.mean(list(result.validation_psnr.values())))
            try:
                scores, _ = score_checkpoint(result.final_checkpoint, gt_points, train.workers)
                row.accuracy = scores.accuracy
                row.completeness = scores.completeness
                row.chamfer = scores.chamfer
            except RejectedInputError as e:
                logger.warning("No Chamfer score for %s seed %d: %s", mode, seed, e)
            log_structured(logger, logging.INFO, "Ablation run finished", **row.model_dump())
            summary.rows.append(row)

    summary.write_csv(out / "ablation.csv")
    ReportGenerator().generate_report(summary, out / "ablation.md")
    for mode in summary.modes():
        logger.info(
            "%s: mean chamfer %.5f (%+.1f%% vs baseline)",
            mode,
            summary.mean(mode),
            100 * summary.relative_change(mode),
        )
    return summary
