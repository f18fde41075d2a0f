"""Bounding boxes, overlap predicates and proposal sampling.

Boxes use continuous pixel coordinates: ``(x, y)`` is the top-left corner,
``y`` grows downward, and the box covers ``[x, x + w) x [y, y + h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import NEG_IOU_MAX, POS_IOU_MAX, POS_IOU_MIN
from .errors import InvalidBoxError, SamplingExhaustedError

MIN_BOX_SIZE = 4.0


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidBoxError(f"{name}={value} is not finite")
            object.__setattr__(self, name, float(value))
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"box size must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_corners(cls, x1, y1, x2, y2) -> "BoundingBox":
        return cls(x1, y1, x2 - x1, y2 - y1)

    @classmethod
    def from_center(cls, cx, cy, w, h) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def clamp(self, frame_size, min_size: float = MIN_BOX_SIZE) -> "BoundingBox":
        """Shrink/shift the box so it lies inside a ``(height, width)`` frame."""
        return BoundingBox(*clamp_boxes(self.as_array()[None], frame_size, min_size)[0])


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # edge arithmetic can round a self-overlap a hair above 1
    return min(1.0, inter / (a.area + b.area - inter))


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def boxes_to_array(boxes) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        return boxes.reshape(-1, 4).astype(np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def array_to_boxes(arr: np.ndarray) -> list[BoundingBox]:
    return [BoundingBox(*row) for row in np.asarray(arr, dtype=np.float64)]


def iou_many(boxes: np.ndarray, ref) -> np.ndarray:
    """IoU of each row of an ``(N, 4)`` xywh array against one reference box."""
    boxes = boxes_to_array(boxes)
    r = ref.as_array() if isinstance(ref, BoundingBox) else np.asarray(ref, dtype=np.float64)
    iw = np.minimum(boxes[:, 0] + boxes[:, 2], r[0] + r[2]) - np.maximum(boxes[:, 0], r[0])
    ih = np.minimum(boxes[:, 1] + boxes[:, 3], r[1] + r[3]) - np.maximum(boxes[:, 1], r[1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = boxes[:, 2] * boxes[:, 3] + r[2] * r[3] - inter
    return np.minimum(inter / union, 1.0)


def center_distance_many(boxes: np.ndarray, ref) -> np.ndarray:
    boxes = boxes_to_array(boxes)
    r = ref.as_array() if isinstance(ref, BoundingBox) else np.asarray(ref, dtype=np.float64)
    dx = (boxes[:, 0] + boxes[:, 2] / 2) - (r[0] + r[2] / 2)
    dy = (boxes[:, 1] + boxes[:, 3] / 2) - (r[1] + r[3] / 2)
    return np.hypot(dx, dy)


def clamp_boxes(boxes: np.ndarray, frame_size, min_size: float = MIN_BOX_SIZE) -> np.ndarray:
    """Limit box sizes to ``[min_size, frame]`` and keep boxes inside the frame."""
    height, width = frame_size
    out = boxes_to_array(boxes).copy()
    out[:, 2] = np.clip(out[:, 2], min(min_size, width), width)
    out[:, 3] = np.clip(out[:, 3], min(min_size, height), height)
    out[:, 0] = np.clip(out[:, 0], 0, width - out[:, 2])
    out[:, 1] = np.clip(out[:, 1], 0, height - out[:, 3])
    return out


@dataclass(frozen=True)
class ProposalSamplingConfig:
    count: int = 256
    translation_sigma: float = 0.6
    scale_sigma: float = 0.05
    scale_limits: tuple[float, float] = (0.7, 1.4)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.translation_sigma < 0 or self.scale_sigma < 0:
            raise ValueError("sigmas must be non-negative")
        lo, hi = self.scale_limits
        if not lo < hi:
            raise ValueError("scale_limits must satisfy min < max")


def _gaussian_boxes(rng, center: np.ndarray, n, translation_sigma, scale_sigma, scale_limits):
    cx = center[0] + center[2] / 2
    cy = center[1] + center[3] / 2
    size = (center[2] + center[3]) / 2
    shifts = rng.standard_normal((n, 2)) * translation_sigma * size
    scales = 2.0 ** (rng.standard_normal(n) * scale_sigma)
    scales = np.clip(scales, *scale_limits)
    w = center[2] * scales
    h = center[3] * scales
    return np.stack([cx + shifts[:, 0] - w / 2, cy + shifts[:, 1] - h / 2, w, h], axis=1)


def sample_proposal_array(center: BoundingBox, cfg: ProposalSamplingConfig, rng_seed,
                          frame_size=None) -> np.ndarray:
    rng = np.random.default_rng(rng_seed)
    boxes = _gaussian_boxes(rng, center.as_array(), cfg.count, cfg.translation_sigma,
                            cfg.scale_sigma, cfg.scale_limits)
    if frame_size is not None:
        boxes = clamp_boxes(boxes, frame_size)
    return boxes


def sample_proposals(center: BoundingBox, cfg: ProposalSamplingConfig, rng_seed,
                     frame_size=None) -> list[BoundingBox]:
    """Draw ``cfg.count`` candidate boxes around ``center``.

    Centers are shifted by Gaussian noise with standard deviation
    ``translation_sigma * mean(w, h)``; both sides are scaled by
    ``2 ** N(0, scale_sigma)`` clipped to ``scale_limits``. When
    ``frame_size`` is given the boxes are clamped into the frame.
    """
    return array_to_boxes(sample_proposal_array(center, cfg, rng_seed, frame_size))


@dataclass(frozen=True)
class TrainingSampleConfig:
    pos_translation_sigma: float = 0.1
    pos_scale_sigma: float = 0.3
    neg_translation_sigma: float = 1.0
    neg_scale_sigma: float = 0.5
    uniform_neg_fraction: float = 0.5
    draws_per_round: int = 512
    max_rounds: int = 200


def _fill(rng, draw, accept, n, cfg: TrainingSampleConfig, what):
    if n == 0:
        return np.zeros((0, 4))
    kept = []
    total = 0
    for _ in range(cfg.max_rounds):
        cand = draw(rng, cfg.draws_per_round)
        cand = cand[accept(cand)]
        kept.append(cand)
        total += len(cand)
        if total >= n:
            return np.concatenate(kept)[:n]
    raise SamplingExhaustedError(
        f"only {total}/{n} {what} samples after {cfg.max_rounds} rounds; "
        "the target box may be degenerate or pressed against the frame border")


def sample_training_box_arrays(gt: BoundingBox, n_pos: int, n_neg: int, rng_seed,
                               frame_size=None, cfg: TrainingSampleConfig | None = None,
                               pos_range=(POS_IOU_MIN, POS_IOU_MAX), neg_max=NEG_IOU_MAX):
    cfg = cfg or TrainingSampleConfig()
    rng = np.random.default_rng(rng_seed)
    center = gt.as_array()
    limits = (0.25, 4.0)

    def clamp(b):
        return clamp_boxes(b, frame_size) if frame_size is not None else b

    def draw_pos(rng, n):
        return clamp(_gaussian_boxes(rng, center, n, cfg.pos_translation_sigma,
                                     cfg.pos_scale_sigma, limits))

    def draw_neg(rng, n):
        boxes = _gaussian_boxes(rng, center, n, cfg.neg_translation_sigma,
                                cfg.neg_scale_sigma, limits)
        if frame_size is not None:
            n_uniform = int(round(n * cfg.uniform_neg_fraction))
            height, width = frame_size
            w = np.full(n_uniform, min(gt.w, width))
            h = np.full(n_uniform, min(gt.h, height))
            x = rng.uniform(0, width - w)
            y = rng.uniform(0, height - h)
            boxes[:n_uniform] = np.stack([x, y, w, h], axis=1)
        return clamp(boxes)

    def accept_pos(b):
        o = iou_many(b, center)
        return (o >= pos_range[0]) & (o <= pos_range[1])

    def accept_neg(b):
        return iou_many(b, center) < neg_max

    if n_pos > 0 and cfg.pos_translation_sigma == 0 and cfg.pos_scale_sigma == 0:
        pos = np.repeat(clamp(center[None]), n_pos, axis=0)
        if not accept_pos(pos).all():
            raise SamplingExhaustedError("clamped ground truth fails the positive IoU range")
    else:
        pos = _fill(rng, draw_pos, accept_pos, n_pos, cfg, "positive")
    neg = _fill(rng, draw_neg, accept_neg, n_neg, cfg, "negative")
    return pos, neg


def sample_training_boxes(gt: BoundingBox, n_pos: int, n_neg: int, rng_seed,
                          frame_size=None, cfg: TrainingSampleConfig | None = None):
    """Rejection-sample labelled training boxes around ``gt``.

    Positives have IoU with ``gt`` in ``[0.7, 1]``, negatives below ``0.5``.
    Raises :class:`SamplingExhaustedError` if the budget runs out first.
    """
    pos, neg = sample_training_box_arrays(gt, n_pos, n_neg, rng_seed, frame_size, cfg)
    return array_to_boxes(pos), array_to_boxes(neg)
