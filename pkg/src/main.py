"""
Main Entry Point for Surface Reconstruction Runs

Ties the pipeline together as subcommands:
1. make-scene: render a synthetic dataset from an analytic scene
2. train: optimize the SDF and radiance fields on a dataset
3. render / extract-mesh: turn a checkpoint into images or an OBJ mesh
4. eval-chamfer / analyze-bias: score meshes and study single rays
5. ablation: train every loss mode and summarize the results
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn, Optional

from src.fields.checkpoint import read_checkpoint
from src.mesher.extract import extract_mesh
from src.mesher.mesh import read_mesh, write_mesh
from src.mesher.metrics import chamfer_l1, sample_surface
from src.renderer.bias_analysis import analyze_ray_bias, parse_profile
from src.renderer.volume import ANCHORS
from src.reporting.ablation import MODES, run_ablation
from src.scene.dataset import load_dataset, read_points, write_dataset, write_gray, write_image
from src.scene.generate import make_scene
from src.scene.library import SCENES
from src.trainer.evaluate import depth_to_image, normals_to_image, psnr, render_view
from src.trainer.loop import run_training
from src.trainer.model import load_model
from src.utils.config import Settings, load_config
from src.utils.errors import ConfigError, ReconstructionError, RejectedInputError
from src.utils.logger import configure_logging

logger = logging.getLogger(__name__)

# Exit codes
EXIT_SUCCESS = 0
EXIT_USAGE = 1  # Bad arguments or configuration
EXIT_ERROR = 2  # Failure while running


class UsageError(Exception):
    """Raised by the parser instead of exiting."""

    def __init__(self, message: str, usage: str) -> None:
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise UsageError(message, self.format_usage())


def _common_options() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument(
        "--config", help="Config file (.yaml or key = value text); default config/settings.yaml"
    )
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one config value (repeatable)",
    )
    common.add_argument("--workers", type=int, help="Worker threads; 1 keeps runs bit-reproducible")
    common.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Parser for every subcommand."""
    common = _common_options()
    parser = _Parser(
        prog="python -m src.main",
        description=(
            "Neural implicit surface reconstruction with geometry-bias"
            " and feature-consistency losses"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Render a 16-view sphere dataset and train the baseline on it
  python -m src.main make-scene sphere --views 16 --res 96 --out data/sphere
  python -m src.main train data/sphere --out runs/sphere --mode baseline

  # Mesh and score the result
  python -m src.main extract-mesh runs/sphere/final.ckpt --res 128 --out runs/sphere/mesh.obj
  python -m src.main eval-chamfer runs/sphere/mesh.obj data/sphere/gt_points.xyz

  # Rendered distance against the true root on one synthetic ray
  python -m src.main analyze-bias --profile linear:0.8:0.5 --s 64 --n 1024

Exit Codes:
  0 - Success
  1 - Usage or configuration error
  2 - Error while running
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("make-scene", parents=[common], help="Render a synthetic dataset")
    p.add_argument("scene", choices=sorted(SCENES), help="Analytic scene name")
    p.add_argument("--views", type=int, help="Number of cameras")
    p.add_argument("--res", type=int, help="Image width and height in pixels")
    p.add_argument("--seed", type=int, help="Rig and surface-sample seed")
    p.add_argument("--out", "-o", required=True, help="Dataset directory")

    p = sub.add_parser("train", parents=[common], help="Train on a dataset")
    p.add_argument("dataset", help="Dataset directory")
    p.add_argument("--out", "-o", required=True, help="Run directory for checkpoints and metrics")
    p.add_argument(
        "--mode", choices=MODES, help="Loss mode (zeroes the bias and/or feature weights)"
    )
    p.add_argument("--iters", type=int, help="Total iterations")
    p.add_argument("--resume", help="Checkpoint to continue from")

    p = sub.add_parser("render", parents=[common], help="Volume-render one view of a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument(
        "--dataset", required=True, help="Dataset providing the camera and reference image"
    )
    p.add_argument("--view", type=int, default=0, help="View index (default: 0)")
    p.add_argument("--out", "-o", help="Output directory (default: next to the checkpoint)")

    p = sub.add_parser(
        "extract-mesh", parents=[common], help="Marching cubes on a checkpoint's SDF"
    )
    p.add_argument("checkpoint")
    p.add_argument("--res", type=int, help="Grid resolution per axis")
    p.add_argument("--out", "-o", help="OBJ path (default: checkpoint path with .obj)")

    p = sub.add_parser(
        "eval-chamfer", parents=[common], help="Chamfer-L1 of a mesh against surface points"
    )
    p.add_argument("mesh", help="OBJ file")
    p.add_argument("gt_points", help="Ground-truth points, one 'x y z' per line")
    p.add_argument("--samples", type=int, help="Points sampled on the mesh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--header", action="store_true", help="Print the CSV header first")

    p = sub.add_parser(
        "analyze-bias", parents=[common], help="Rendered distance against the true root on one ray"
    )
    p.add_argument(
        "--profile", required=True, help="linear:SLOPE:T_STAR or piecewise:BEFORE:AFTER:T_STAR"
    )
    p.add_argument("--s", type=float, required=True, help="Sharpness (inverse standard deviation)")
    p.add_argument("--n", type=int, required=True, help="Number of evenly spaced samples")
    p.add_argument("--range", type=float, nargs=2, default=(0.0, 1.0), metavar=("NEAR", "FAR"))
    p.add_argument(
        "--anchor", choices=ANCHORS, default="left", help="Interval distance used for the average"
    )
    p.add_argument("--out", "-o", help="CSV path (default: standard output)")

    p = sub.add_parser("ablation", parents=[common], help="Train and score every loss mode")
    p.add_argument("dataset", help="Dataset directory")
    p.add_argument("--out", "-o", required=True, help="Directory for the runs and the summary")
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--iters", type=int, help="Total iterations per run")

    return parser


def _settings(args: argparse.Namespace, extra: Sequence[str] = ()) -> Settings:
    overrides = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"train.workers={args.workers}")
    overrides.extend(extra)
    return load_config(args.config, overrides)


def _configure_logging(settings: Settings, command: str, verbose: bool) -> None:
    context = {"command": command, "mode": settings.train.mode, "seed": settings.train.seed}
    configure_logging(settings.logging, level="DEBUG" if verbose else None, context=context)


def _optional(pairs: Sequence[tuple[str, Optional[object]]]) -> list[str]:
    return [f"{key}={value}" for key, value in pairs if value is not None]


def cmd_make_scene(args: argparse.Namespace, settings: Settings) -> int:
    dataset = make_scene(settings.scene, settings.train.workers)
    write_dataset(args.out, dataset)
    print(args.out)
    return EXIT_SUCCESS


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    result = run_training(settings, args.dataset, args.out, resume=args.resume)
    print(result.final_checkpoint)
    return EXIT_SUCCESS


def cmd_render(args: argparse.Namespace, settings: Settings) -> int:
    model, params = load_model(read_checkpoint(args.checkpoint))
    dataset = load_dataset(args.dataset)
    if not 0 <= args.view < dataset.n_views:
        raise RejectedInputError(f"view {args.view} outside 0..{dataset.n_views - 1}")
    rendered = render_view(model, params, dataset.cameras[args.view])

    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    stem = f"render_{args.view:03d}"
    write_image(out / f"{stem}.ppm", rendered.image)
    write_image(out / f"{stem}_normals.ppm", normals_to_image(rendered.normals))
    write_gray(out / f"{stem}_depth.pgm", depth_to_image(rendered.depth, rendered.mask))

    truth = dataset.images[args.view]
    mask = dataset.masks[args.view] if dataset.masks is not None else rendered.mask
    full = psnr(rendered.image, truth)
    masked = psnr(rendered.image, truth, mask) if mask.any() else float("nan")
    print("view,psnr,masked_psnr")
    print(f"{args.view},{full!r},{masked!r}")
    return EXIT_SUCCESS


def cmd_extract_mesh(args: argparse.Namespace, settings: Settings) -> int:
    model, params = load_model(read_checkpoint(args.checkpoint))
    field = model.sdf_field(params)
    mesh = extract_mesh(field, model.settings.mesh, settings.train.workers, args.res)
    if mesh.is_empty:
        logger.warning("The SDF has no zero crossing inside the box; writing an empty mesh")
    out = Path(args.out) if args.out else Path(args.checkpoint).with_suffix(".obj")
    print(write_mesh(mesh, out))
    return EXIT_SUCCESS


def cmd_eval_chamfer(args: argparse.Namespace, settings: Settings) -> int:
    mesh = read_mesh(args.mesh)
    gt = read_points(Path(args.gt_points))
    n = args.samples if args.samples is not None else settings.mesh.sample_points
    result = chamfer_l1(sample_surface(mesh, n, args.seed), gt)
    if args.header:
        print("accuracy,completeness,chamfer")
    print(result.csv_row())
    return EXIT_SUCCESS


def cmd_analyze_bias(args: argparse.Namespace, settings: Settings) -> int:
    report = analyze_ray_bias(
        parse_profile(args.profile), args.s, args.n, tuple(args.range), args.anchor
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            report.write_csv(handle)
        print(f"bias={report.bias!r}")
    else:
        report.write_csv(sys.stdout)
    return EXIT_SUCCESS


def cmd_ablation(args: argparse.Namespace, settings: Settings) -> int:
    summary = run_ablation(settings, args.dataset, args.out, args.seeds, args.modes)
    print("mode,mean_chamfer")
    for mode in summary.modes():
        print(f"{mode},{summary.mean(mode)!r}")
    return EXIT_SUCCESS


COMMANDS = {
    "make-scene": cmd_make_scene,
    "train": cmd_train,
    "render": cmd_render,
    "extract-mesh": cmd_extract_mesh,
    "eval-chamfer": cmd_eval_chamfer,
    "analyze-bias": cmd_analyze_bias,
    "ablation": cmd_ablation,
}


def _command_overrides(args: argparse.Namespace) -> list[str]:
    if args.command == "make-scene":
        return _optional(
            [
                ("scene.name", args.scene),
                ("scene.n_views", args.views),
                ("scene.resolution", args.res),
                ("scene.seed", args.seed),
            ]
        )
    if args.command in ("train", "ablation"):
        return _optional(
            [("train.mode", getattr(args, "mode", None)), ("train.total_iters", args.iters)]
        )
    return []


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        settings = _settings(args, _command_overrides(args))
    except UsageError as e:
        sys.stderr.write(e.usage)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except ConfigError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except OSError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR

    _configure_logging(settings, args.command, args.verbose)
    try:
        return COMMANDS[args.command](args, settings)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    except (ReconstructionError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ERROR
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_ERROR


def main() -> None:
    """Main entry point."""
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
