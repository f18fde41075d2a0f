"""Ground-truth masks and sample patch extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import DegenerateBoxError
from ..geometry import BoundingBox, boxes_to_array

PATCH_SIZE = 107
PIXEL_MEAN = 128.0
PIXEL_SCALE = 128.0


def normalize_pixels(values):
    """Map 8-bit intensities to the classifier input range ``[-1, 1)``."""
    return (values - PIXEL_MEAN) / PIXEL_SCALE


@dataclass(frozen=True)
class GroundTruthMask:
    mask: np.ndarray
    source_box: BoundingBox
    polarity: str = "target_high"

    def normalized(self) -> np.ndarray:
        """Mask scaled to ``[0, 1]`` as a float32 array (no polarity flip)."""
        return self.mask.astype(np.float32) / 255.0


def _pixel_span(lo: float, hi: float, limit: int) -> tuple[int, int]:
    # pixel i is inside when lo <= i + 0.5 < hi
    start = max(0, math.ceil(lo - 0.5))
    stop = min(limit, math.ceil(hi - 0.5))
    return start, max(start, stop)


def make_mask(frame_size, box: BoundingBox, polarity: str = "target_high") -> GroundTruthMask:
    """Binary mask of pixels whose centers fall inside ``box``.

    ``target_high`` paints the target 255 on a 0 background; ``target_low``
    is the inverted convention.
    """
    height, width = frame_size
    if box.x2 <= 0 or box.y2 <= 0 or box.x >= width or box.y >= height:
        raise DegenerateBoxError(f"{box} lies outside the {width}x{height} frame")
    inside, outside = (255, 0) if polarity == "target_high" else (0, 255)
    mask = np.full((height, width), outside, dtype=np.uint8)
    r0, r1 = _pixel_span(box.y, box.y2, height)
    c0, c1 = _pixel_span(box.x, box.x2, width)
    mask[r0:r1, c0:c1] = inside
    return GroundTruthMask(mask, box, polarity)


@dataclass
class SamplePair:
    rgb_patch: torch.Tensor
    thermal_patch: torch.Tensor
    label: int | None = None
    box: BoundingBox | None = None


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """``H x W x 3`` uint8 -> ``1 x 3 x H x W`` float32 (unnormalized)."""
    arr = np.ascontiguousarray(image, dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def _crop_grid(boxes: np.ndarray, out_size, padding: float, image_size) -> torch.Tensor:
    oh, ow = out_size
    height, width = image_size
    cx = boxes[:, 0] + boxes[:, 2] / 2
    cy = boxes[:, 1] + boxes[:, 3] / 2
    w = boxes[:, 2] * (1 + 2 * padding)
    h = boxes[:, 3] * (1 + 2 * padding)
    u = (np.arange(ow) + 0.5) / ow
    v = (np.arange(oh) + 0.5) / oh
    # source coordinates in pixel-center convention
    xs = (cx - w / 2)[:, None] + u[None, :] * w[:, None] - 0.5
    ys = (cy - h / 2)[:, None] + v[None, :] * h[:, None] - 0.5
    xn = (2 * xs + 1) / width - 1
    yn = (2 * ys + 1) / height - 1
    n = len(boxes)
    grid = np.empty((n, oh, ow, 2), dtype=np.float64)
    grid[..., 0] = xn[:, None, :]
    grid[..., 1] = yn[:, :, None]
    return torch.from_numpy(grid)


def crop_patches(image, boxes, out_size=(PATCH_SIZE, PATCH_SIZE), padding: float = 0.0,
                 normalize: bool = True) -> torch.Tensor:
    """Crop and bilinearly resize ``boxes`` from one image.

    ``padding`` enlarges each box by that fraction of its size on every side.
    Regions outside the image take the per-channel image mean. Returns an
    ``N x 3 x H x W`` float32 tensor.
    """
    if isinstance(image, np.ndarray):
        image = image_to_tensor(image)
    boxes = boxes_to_array(boxes)
    height, width = image.shape[-2:]
    mean = image.mean(dim=(2, 3), keepdim=True)
    grid = _crop_grid(boxes, out_size, padding, (height, width)).to(image.dtype)
    n, oh, ow, _ = grid.shape
    if n == 0:
        return image.new_zeros((0, 3, oh, ow))
    flat = grid.reshape(1, n * oh, ow, 2)
    out = F.grid_sample(image - mean, flat, mode="bilinear", padding_mode="zeros",
                        align_corners=False) + mean
    out = out.reshape(3, n, oh, ow).permute(1, 0, 2, 3).contiguous()
    return normalize_pixels(out) if normalize else out


def crop_pair_patches(rgb, thermal, boxes, out_size=(PATCH_SIZE, PATCH_SIZE),
                      padding: float = 0.0):
    """Crop the identical boxes from both modalities."""
    return (crop_patches(rgb, boxes, out_size, padding),
            crop_patches(thermal, boxes, out_size, padding))


def crop_patch(frame, box: BoundingBox, out_size=(PATCH_SIZE, PATCH_SIZE),
               padding: float = 0.0) -> SamplePair:
    height, width = frame.size
    if box.x2 <= 0 or box.y2 <= 0 or box.x >= width or box.y >= height:
        raise DegenerateBoxError(f"{box} lies outside the {width}x{height} frame")
    rgb, thermal = frame.images()
    r, t = crop_pair_patches(rgb, thermal, [box], out_size, padding)
    return SamplePair(r[0], t[0], None, box)
