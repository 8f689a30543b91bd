"""On-disk scene datasets.

Layout of a dataset directory::

    cameras.txt            one block per view (see ``format_cameras``)
    images/view_%03d.ppm   binary P6, maxval 255
    masks/view_%03d.pgm    binary P5, 0 or 255 (optional)
    gt_points.xyz          one ``x y z`` per line

Images are quantized to 8 bits on write; cameras and points are written
with 17 significant digits and read back exactly.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from src.features.camera import Camera
from src.utils.errors import DatasetParseError, RejectedInputError

logger = logging.getLogger(__name__)

CAMERAS_FILE = "cameras.txt"
POINTS_FILE = "gt_points.xyz"
IMAGE_PATTERN = "images/view_{:03d}.ppm"
MASK_PATTERN = "masks/view_{:03d}.pgm"


@dataclass
class SceneDataset:
    """Cameras, images, optional masks and surface samples of one scene."""

    cameras: list[Camera]
    images: list[NDArray[np.float64]]
    gt_points: NDArray[np.float64]
    masks: Optional[list[NDArray[np.bool_]]] = None

    def __post_init__(self) -> None:
        if len(self.images) != len(self.cameras):
            raise RejectedInputError(f"{len(self.cameras)} cameras but {len(self.images)} images")
        if self.masks is not None and len(self.masks) != len(self.cameras):
            raise RejectedInputError(f"{len(self.cameras)} cameras but {len(self.masks)} masks")
        for i, (camera, image) in enumerate(zip(self.cameras, self.images)):
            if image.shape != (camera.height, camera.width, 3):
                raise RejectedInputError(
                    f"view {i}: image shape {image.shape} != camera size "
                    f"{camera.width}x{camera.height}"
                )
            if self.masks is not None and self.masks[i].shape != (camera.height, camera.width):
                raise RejectedInputError(
                    f"view {i}: mask shape {self.masks[i].shape} does not match camera"
                )

    @property
    def n_views(self) -> int:
        return len(self.cameras)


def _row(values: NDArray[np.float64]) -> str:
    return " ".join(f"{float(v):.17g}" for v in values)


def format_cameras(cameras: list[Camera]) -> str:
    """Text of ``cameras.txt``: per view ``view i``, K rows, R rows, t row, ``size W H``."""
    lines = ["# view <index>; 3 rows K; 3 rows R (world to camera); 1 row t; size <W> <H>"]
    for i, cam in enumerate(cameras):
        lines.append(f"view {i}")
        lines.extend(_row(r) for r in cam.K)
        lines.extend(_row(r) for r in cam.R)
        lines.append(_row(cam.t))
        lines.append(f"size {cam.width} {cam.height}")
    return "\n".join(lines) + "\n"


def parse_cameras(text: str, path: str = CAMERAS_FILE) -> list[Camera]:
    """Parse ``cameras.txt``.

    Raises:
        DatasetParseError: With line number and byte offset of the bad record.
    """
    records: list[tuple[int, int, list[str]]] = []
    offset = 0
    for number, raw in enumerate(text.splitlines(keepends=True), start=1):
        content = raw.split("#", 1)[0].split()
        if content:
            records.append((number, offset, content))
        offset += len(raw.encode("utf-8"))

    cameras: list[Camera] = []
    pos = 0
    block = 9
    while pos < len(records):
        number, start, head = records[pos]
        if len(head) != 2 or head[0] != "view":
            got = " ".join(head)
            raise DatasetParseError(
                path, f"expected 'view <index>', got '{got}'", offset=start, line=number
            )
        if head[1] != str(len(cameras)):
            raise DatasetParseError(
                path, f"expected view {len(cameras)}, got {head[1]}", offset=start, line=number
            )
        if pos + block > len(records):
            raise DatasetParseError(path, "truncated camera block", offset=offset, line=number)
        rows = []
        for line_no, line_start, fields in records[pos + 1 : pos + 8]:
            if len(fields) != 3:
                raise DatasetParseError(
                    path, f"expected 3 numbers, got {len(fields)}", offset=line_start, line=line_no
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as e:
                raise DatasetParseError(
                    path, f"bad number: {e}", offset=line_start, line=line_no
                ) from e
        line_no, line_start, size = records[pos + 8]
        if len(size) != 3 or size[0] != "size" or not size[1].isdigit() or not size[2].isdigit():
            raise DatasetParseError(
                path, "expected 'size <W> <H>'", offset=line_start, line=line_no
            )
        try:
            cameras.append(
                Camera(
                    K=np.array(rows[0:3]),
                    R=np.array(rows[3:6]),
                    t=np.array(rows[6]),
                    width=int(size[1]),
                    height=int(size[2]),
                )
            )
        except ValidationError as e:
            raise DatasetParseError(path, f"invalid camera: {e}", offset=start, line=number) from e
        pos += block
    if not cameras:
        raise DatasetParseError(path, "no cameras found", offset=0)
    return cameras


def _to_bytes(image: NDArray[np.float64]) -> NDArray[np.uint8]:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path: Path, image: NDArray[np.float64]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(_to_bytes(image)).save(path, format="PPM")


def write_gray(path: Path, values: NDArray[np.float64]) -> None:
    """Single-channel P5 image of values in [0, 1]."""
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(_to_bytes(values)).save(path, format="PPM")


def write_mask(path: Path, mask: NDArray[np.bool_]) -> None:
    write_gray(path, np.asarray(mask, dtype=np.float64))


def _read_netpbm(path: Path, mode: str, channels: int) -> NDArray[np.uint8]:
    try:
        size = path.stat().st_size
        with Image.open(path) as img:
            if img.format != "PPM" or img.mode != mode:
                found = f"{img.format} {img.mode}"
                raise DatasetParseError(
                    str(path), f"expected binary {mode} netpbm image, got {found}", offset=0
                )
            data_offset = int(img.tile[0][2]) if img.tile else 0
            expected = data_offset + img.width * img.height * channels
            if size < expected:
                raise DatasetParseError(
                    str(path), f"truncated image data, expected {expected} bytes", offset=size
                )
            return np.asarray(img, dtype=np.uint8)
    except (UnidentifiedImageError, SyntaxError, ValueError) as e:
        raise DatasetParseError(str(path), f"bad image header: {e}", offset=0) from e
    except OSError as e:
        raise DatasetParseError(str(path), f"cannot read image: {e}") from e


def read_image(path: Path) -> NDArray[np.float64]:
    """RGB image in [0, 1] from a binary P6 file."""
    out: NDArray[np.float64] = _read_netpbm(path, "RGB", 3).astype(np.float64) / 255.0
    return out


def read_mask(path: Path) -> NDArray[np.bool_]:
    return _read_netpbm(path, "L", 1) >= 128


def write_points(path: Path, points: NDArray[np.float64]) -> None:
    path.write_text("".join(_row(p) + "\n" for p in points), encoding="utf-8")


def read_points(path: Path) -> NDArray[np.float64]:
    """``x y z`` rows.

    Raises:
        DatasetParseError: With line number and byte offset of a bad row.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetParseError(str(path), f"cannot read points: {e}") from e
    points = []
    offset = 0
    for number, raw in enumerate(text.splitlines(keepends=True), start=1):
        fields = raw.split("#", 1)[0].split()
        if fields:
            try:
                if len(fields) != 3:
                    raise ValueError(f"expected 3 numbers, got {len(fields)}")
                points.append([float(f) for f in fields])
            except ValueError as e:
                raise DatasetParseError(str(path), str(e), offset=offset, line=number) from e
        offset += len(raw.encode("utf-8"))
    return np.array(points, dtype=np.float64).reshape(-1, 3)


def write_dataset(directory: str | Path, dataset: SceneDataset) -> Path:
    """Write ``dataset`` under ``directory`` (created as needed)."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / CAMERAS_FILE).write_text(format_cameras(dataset.cameras), encoding="utf-8")
    for i, image in enumerate(dataset.images):
        write_image(root / IMAGE_PATTERN.format(i), image)
    if dataset.masks is not None:
        for i, mask in enumerate(dataset.masks):
            write_mask(root / MASK_PATTERN.format(i), mask)
    write_points(root / POINTS_FILE, dataset.gt_points)
    logger.info("Wrote dataset with %d views to %s", dataset.n_views, root)
    return root


def load_dataset(directory: str | Path) -> SceneDataset:
    """Load a dataset directory; masks are optional, everything else is required.

    Raises:
        DatasetParseError: For a missing or malformed file, naming the file.
    """
    root = Path(directory)
    cameras_path = root / CAMERAS_FILE
    try:
        text = cameras_path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetParseError(str(cameras_path), f"cannot read cameras: {e}") from e
    cameras = parse_cameras(text, str(cameras_path))

    images = []
    for i, camera in enumerate(cameras):
        path = root / IMAGE_PATTERN.format(i)
        image = read_image(path)
        if image.shape[:2] != (camera.height, camera.width):
            raise DatasetParseError(
                str(path), f"image size does not match camera {camera.width}x{camera.height}"
            )
        images.append(image)

    masks: Optional[list[NDArray[np.bool_]]] = None
    if (root / MASK_PATTERN.format(0)).parent.is_dir():
        masks = [read_mask(root / MASK_PATTERN.format(i)) for i in range(len(cameras))]

    points_path = root / POINTS_FILE
    gt_points = read_points(points_path) if points_path.exists() else np.zeros((0, 3))
    return SceneDataset(cameras=cameras, images=images, gt_points=gt_points, masks=masks)
