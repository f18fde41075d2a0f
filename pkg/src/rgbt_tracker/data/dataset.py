"""RGB-T frames and sequences, GTOT-50 / RGBT-234 loaders and a GTOT writer."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from ..errors import (CountMismatchError, MalformedAnnotationError, MissingDirectoryError,
                      ShapeMismatchError)
from ..geometry import BoundingBox

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}

RGBT234_ATTRIBUTES = ("NO", "PO", "HO", "LI", "LR", "TC", "DEF", "FM", "SV", "MB", "CM", "BC")
GTOT_ATTRIBUTES = ("OCC", "LSV", "FM", "LI", "TC", "SO", "DEF")
KNOWN_ATTRIBUTES = frozenset(RGBT234_ATTRIBUTES + GTOT_ATTRIBUTES)

_TAG_FILE_NAMES = {
    "no_occlusion": "NO",
    "partial_occlusion": "PO",
    "heavy_occlusion": "HO",
    "low_illumination": "LI",
    "low_resolution": "LR",
    "thermal_crossover": "TC",
    "deformation": "DEF",
    "fast_motion": "FM",
    "scale_variation": "SV",
    "motion_blur": "MB",
    "camera_moving": "CM",
    "background_clutter": "BC",
}

ATTRIBUTE_FILE = "attributes.txt"


def read_image(path) -> np.ndarray:
    """Read an image as ``H x W x 3`` uint8 RGB; grayscale is replicated."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FileNotFoundError(f"cannot read image {path}")
    if img.dtype == np.uint16:
        img = (img >> 8).astype(np.uint8)
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    if img.shape[2] == 4:
        img = img[:, :, :3]
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def _as_rgb3(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    elif img.ndim == 3 and img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeMismatchError(f"expected an H x W x 3 image, got shape {img.shape}")
    return img.astype(np.uint8, copy=False)


class RGBTFrame:
    """A visible/thermal image pair with an optional ground-truth box.

    Images may be given as arrays or as file paths; paths are read on every
    access so long sequences never sit in memory all at once.
    """

    __slots__ = ("_rgb", "_thermal", "gt")

    def __init__(self, rgb, thermal, gt: BoundingBox | None = None):
        if isinstance(rgb, np.ndarray) or isinstance(thermal, np.ndarray):
            rgb = _as_rgb3(rgb)
            thermal = _as_rgb3(thermal)
            _check_pair(rgb, thermal)
            rgb.setflags(write=False)
            thermal.setflags(write=False)
        self._rgb = rgb
        self._thermal = thermal
        self.gt = gt

    @property
    def rgb(self) -> np.ndarray:
        return self._load()[0]

    @property
    def thermal(self) -> np.ndarray:
        return self._load()[1]

    @property
    def paths(self):
        if isinstance(self._rgb, np.ndarray):
            return None
        return self._rgb, self._thermal

    @property
    def size(self) -> tuple[int, int]:
        """(height, width)."""
        return self.rgb.shape[:2]

    def images(self) -> tuple[np.ndarray, np.ndarray]:
        return self._load()

    def _load(self):
        if isinstance(self._rgb, np.ndarray):
            return self._rgb, self._thermal
        rgb, thermal = read_image(self._rgb), read_image(self._thermal)
        _check_pair(rgb, thermal)
        return rgb, thermal


def _check_pair(rgb, thermal):
    if rgb.shape[:2] != thermal.shape[:2]:
        raise ShapeMismatchError(
            f"RGB frame {rgb.shape[:2]} and thermal frame {thermal.shape[:2]} differ in size")


@dataclass(frozen=True)
class Sequence:
    name: str
    frames: tuple
    attributes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "attributes", frozenset(self.attributes))
        if not self.frames:
            raise ValueError(f"sequence {self.name!r} has no frames")
        if self.frames[0].gt is None:
            raise ValueError(f"sequence {self.name!r}: frame 0 needs a ground-truth box")

    def __len__(self):
        return len(self.frames)

    @property
    def ground_truth(self) -> list:
        return [f.gt for f in self.frames]


# -- annotation parsing ------------------------------------------------------

_SPLIT = re.compile(r"[,\s]+")


def parse_annotation_file(path, four_token_format: str = "xywh") -> list[BoundingBox | None]:
    """Parse one box per line.

    Lines hold 4 numbers (``xywh`` or ``corners`` = x1 y1 x2 y2, chosen by the
    caller) or 8 numbers (four corner points, reduced to their bounding box).
    The token count of the first line fixes the format for the whole file.
    Boxes with non-positive size become ``None`` (target absent).
    """
    path = Path(path)
    boxes = []
    n_tokens = None
    for line_no, raw in enumerate(path.read_text().splitlines(), 1):
        text = raw.strip()
        if not text:
            continue
        tokens = [t for t in _SPLIT.split(text) if t]
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            raise MalformedAnnotationError(path, line_no, raw) from None
        if n_tokens is None:
            n_tokens = len(values)
        if len(values) != n_tokens or n_tokens not in (4, 8):
            raise MalformedAnnotationError(path, line_no, raw)
        if n_tokens == 8:
            xs, ys = values[0::2], values[1::2]
            x1, y1, x2, y2 = min(xs), min(ys), max(xs), max(ys)
        elif four_token_format == "corners":
            x1, y1, x2, y2 = values
        else:
            x1, y1 = values[0], values[1]
            x2, y2 = x1 + values[2], y1 + values[3]
        boxes.append(BoundingBox.from_corners(x1, y1, x2, y2) if x2 > x1 and y2 > y1 else None)
    return boxes


def _natural_key(path: Path):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", path.name)]


def _list_images(folder: Path) -> list[Path]:
    files = [p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    return sorted(files, key=_natural_key)


def _find_dir(root: Path, names) -> Path:
    for name in names:
        if (root / name).is_dir():
            return root / name
    raise MissingDirectoryError(f"{root}: none of {', '.join(names)} found")


def _read_attributes(root: Path) -> frozenset:
    tags = set()
    attr_file = root / ATTRIBUTE_FILE
    if attr_file.is_file():
        tags.update(t for t in _SPLIT.split(attr_file.read_text().strip()) if t)
    for tag_file in root.glob("*.tag"):
        flags = [t for t in _SPLIT.split(tag_file.read_text().strip()) if t]
        if any(float(f) != 0 for f in flags):
            tags.add(_TAG_FILE_NAMES.get(tag_file.stem, tag_file.stem))
    return frozenset(tags)


def _assemble(root: Path, rgb_files, th_files, boxes, name) -> Sequence:
    if len(rgb_files) != len(th_files):
        raise CountMismatchError(
            f"{root}: {len(rgb_files)} RGB frames but {len(th_files)} thermal frames")
    if len(boxes) != len(rgb_files):
        raise CountMismatchError(
            f"{root}: {len(boxes)} ground-truth lines but {len(rgb_files)} frames")
    frames = [RGBTFrame(r, t, b) for r, t, b in zip(rgb_files, th_files, boxes)]
    return Sequence(name or root.name, frames, _read_attributes(root))


def load_gtot_sequence(dir_path, gt_source: str = "visible", name: str | None = None) -> Sequence:
    """Load a GTOT-50 style sequence directory.

    Expected layout: ``v/`` or ``visible/`` and ``i/`` or ``infrared/`` image
    folders plus ``groundTruth_v.txt`` / ``groundTruth_i.txt`` holding corner
    pairs ``x1 y1 x2 y2``.
    """
    root = Path(dir_path)
    if not root.is_dir():
        raise MissingDirectoryError(f"{root} is not a directory")
    rgb_dir = _find_dir(root, ("v", "visible"))
    th_dir = _find_dir(root, ("i", "infrared"))
    primary, other = ("groundTruth_v.txt", "groundTruth_i.txt")
    if gt_source == "infrared":
        primary, other = other, primary
    gt_path = root / primary if (root / primary).is_file() else root / other
    if not gt_path.is_file():
        raise MissingDirectoryError(f"{root}: no groundTruth_v.txt or groundTruth_i.txt")
    boxes = parse_annotation_file(gt_path, four_token_format="corners")
    return _assemble(root, _list_images(rgb_dir), _list_images(th_dir), boxes, name)


def load_rgbt234_sequence(dir_path, gt_source: str = "visible", name: str | None = None) -> Sequence:
    """Load an RGBT-234 style sequence (``visible/``, ``infrared/``, ``visible.txt``)."""
    root = Path(dir_path)
    if not root.is_dir():
        raise MissingDirectoryError(f"{root} is not a directory")
    rgb_dir = _find_dir(root, ("visible",))
    th_dir = _find_dir(root, ("infrared",))
    candidates = ["visible.txt", "infrared.txt", "init.txt"]
    if gt_source == "infrared":
        candidates[:2] = candidates[1::-1]
    gt_path = next((root / c for c in candidates if (root / c).is_file()), None)
    if gt_path is None:
        raise MissingDirectoryError(f"{root}: no visible.txt / infrared.txt annotation")
    boxes = parse_annotation_file(gt_path, four_token_format="xywh")
    return _assemble(root, _list_images(rgb_dir), _list_images(th_dir), boxes, name)


def detect_layout(dir_path) -> str:
    root = Path(dir_path)
    if (root / "groundTruth_v.txt").is_file() or (root / "groundTruth_i.txt").is_file():
        return "gtot"
    if (root / "visible.txt").is_file() or (root / "infrared.txt").is_file():
        return "rgbt234"
    raise MissingDirectoryError(f"{root}: not a GTOT or RGBT-234 sequence directory")


def load_sequence(dir_path, gt_source: str = "visible") -> Sequence:
    if detect_layout(dir_path) == "gtot":
        return load_gtot_sequence(dir_path, gt_source)
    return load_rgbt234_sequence(dir_path, gt_source)


def find_sequences(dataset_dir) -> list[Path]:
    """Sequence directories directly below ``dataset_dir``, sorted by name."""
    root = Path(dataset_dir)
    if not root.is_dir():
        raise MissingDirectoryError(f"{root} is not a directory")
    found = []
    for child in sorted(root.iterdir()):
        if child.is_dir():
            try:
                detect_layout(child)
            except MissingDirectoryError:
                continue
            found.append(child)
    return found


def _fmt(v: float) -> str:
    return repr(float(v))


def save_gtot(seq: Sequence, out_dir) -> Path:
    """Write ``seq`` in the GTOT layout; thermal frames are stored single-channel."""
    root = Path(out_dir)
    (root / "visible").mkdir(parents=True, exist_ok=True)
    (root / "infrared").mkdir(parents=True, exist_ok=True)
    lines = []
    for idx, frame in enumerate(seq.frames, 1):
        rgb, thermal = frame.images()
        cv2.imwrite(str(root / "visible" / f"{idx:05d}.png"), cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
        cv2.imwrite(str(root / "infrared" / f"{idx:05d}.png"), thermal[:, :, 0])
        b = frame.gt
        if b is None:
            lines.append("0 0 0 0")
        else:
            lines.append(" ".join(_fmt(v) for v in (b.x, b.y, b.x2, b.y2)))
    text = "\n".join(lines) + "\n"
    (root / "groundTruth_v.txt").write_text(text)
    (root / "groundTruth_i.txt").write_text(text)
    if seq.attributes:
        (root / ATTRIBUTE_FILE).write_text(",".join(sorted(seq.attributes)) + "\n")
    return root
