"""Seeded synthetic RGB-T sequences with exact ground truth.

The RGB stream shows a textured target over colour clutter plus textured
distractors; the thermal stream shows only the target, as a bright blob on a
dark background. Motion paths are analytic so the ground truth is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import cv2
import numpy as np

from ..geometry import BoundingBox
from .dataset import RGBTFrame, Sequence

MOTION_TYPES = ("static", "linear", "circular", "waypoints")


@dataclass
class SyntheticSpec:
    frames: int = 20
    frame_size: tuple[int, int] = (240, 320)
    target_size: tuple[float, float] = (40.0, 40.0)
    motion: dict = field(default_factory=lambda: {"type": "static", "start": [140.0, 100.0]})
    distractors: int = 2
    occlusion_span: tuple[int, int] | None = None
    hidden_span: tuple[int, int] | None = None
    attributes: tuple[str, ...] = ()
    name: str = "synthetic"

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.motion.get("type") not in MOTION_TYPES:
            raise ValueError(f"motion type must be one of {MOTION_TYPES}")
        self.frame_size = tuple(int(v) for v in self.frame_size)
        self.target_size = tuple(float(v) for v in self.target_size)
        if self.occlusion_span is not None:
            self.occlusion_span = tuple(self.occlusion_span)
        if self.hidden_span is not None:
            self.hidden_span = tuple(self.hidden_span)
        self.attributes = tuple(self.attributes)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known - {"seed"}
        if unknown:
            raise ValueError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    @classmethod
    def load(cls, path) -> tuple["SyntheticSpec", int | None]:
        """Read a JSON spec file; an optional ``seed`` key is returned alongside."""
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("synthetic spec must be a JSON object")
        return cls.from_dict(data), data.get("seed")

    def to_dict(self) -> dict:
        return asdict(self)


def motion_position(motion: dict, t: float) -> tuple[float, float]:
    """Top-left corner of the target at frame ``t``."""
    kind = motion["type"]
    if kind == "static":
        x, y = motion["start"]
        return float(x), float(y)
    if kind == "linear":
        (x, y), (vx, vy) = motion["start"], motion["velocity"]
        return x + vx * t, y + vy * t
    if kind == "circular":
        (cx, cy) = motion["center"]
        radius = motion["radius"]
        angle = 2 * math.pi * t / motion["period"] + motion.get("phase", 0.0)
        return cx + radius * math.cos(angle), cy + radius * math.sin(angle)
    # waypoints: [[frame, x, y], ...], piecewise linear, held constant past the ends
    points = sorted(motion["points"], key=lambda p: p[0])
    if t <= points[0][0]:
        return float(points[0][1]), float(points[0][2])
    for (f0, x0, y0), (f1, x1, y1) in zip(points, points[1:]):
        if f0 <= t <= f1:
            a = (t - f0) / (f1 - f0) if f1 > f0 else 1.0
            return x0 + a * (x1 - x0), y0 + a * (y1 - y0)
    return float(points[-1][1]), float(points[-1][2])


def _smooth_noise(rng, shape, cells, lo, hi, channels):
    height, width = shape
    coarse = rng.uniform(lo, hi, size=(cells[0], cells[1], channels)).astype(np.float32)
    img = cv2.resize(coarse, (width, height), interpolation=cv2.INTER_CUBIC)
    return img.reshape(height, width, channels)


def _texture(rng, size):
    w, h = (max(1, int(round(v))) for v in size)
    colors = rng.uniform(40, 255, size=(2, 3))
    yy, xx = np.mgrid[0:h, 0:w]
    cell = max(2, min(w, h) // 5)
    checker = ((xx // cell + yy // cell) % 2).astype(np.float32)
    tex = colors[0] * checker[..., None] + colors[1] * (1 - checker[..., None])
    tex += rng.normal(0, 8, size=tex.shape)
    return tex.astype(np.float32)


def _thermal_blob(size):
    w, h = (max(1, int(round(v))) for v in size)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)
    nx = (xx + 0.5 - w / 2) / (w / 2)
    ny = (yy + 0.5 - h / 2) / (h / 2)
    r2 = nx ** 2 + ny ** 2
    return np.clip(1.1 - 0.6 * r2, 0, 1) * (r2 <= 1.0)


def _paste(canvas, patch, x, y, alpha=None):
    height, width = canvas.shape[:2]
    ph, pw = patch.shape[:2]
    x0, y0 = int(round(x)), int(round(y))
    cx0, cy0 = max(0, x0), max(0, y0)
    cx1, cy1 = min(width, x0 + pw), min(height, y0 + ph)
    if cx1 <= cx0 or cy1 <= cy0:
        return
    sub = patch[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
    if alpha is None:
        canvas[cy0:cy1, cx0:cx1] = sub
    else:
        a = alpha[cy0 - y0:cy1 - y0, cx0 - x0:cx1 - x0]
        if canvas.ndim == 3:
            a = a[..., None]
        canvas[cy0:cy1, cx0:cx1] = a * sub + (1 - a) * canvas[cy0:cy1, cx0:cx1]


def _in_span(span, t):
    return span is not None and span[0] <= t < span[1]


def synthesize_sequence(spec: SyntheticSpec, rng_seed: int = 0) -> Sequence:
    rng = np.random.default_rng(rng_seed)
    height, width = spec.frame_size
    tw, th = spec.target_size

    rgb_bg = _smooth_noise(rng, (height, width), (6, 8), 30, 200, 3)
    for _ in range(12):
        cw, ch = rng.integers(10, 60, size=2)
        cx, cy = rng.integers(0, width), rng.integers(0, height)
        rgb_bg[cy:cy + ch, cx:cx + cw] = rng.uniform(30, 220, size=3)
    thermal_bg = _smooth_noise(rng, (height, width), (4, 5), 15, 55, 1)[..., 0]

    target_tex = _texture(rng, spec.target_size)
    blob = _thermal_blob(spec.target_size).astype(np.float32)
    distractors = []
    for _ in range(spec.distractors):
        dx = rng.uniform(0, max(1.0, width - tw))
        dy = rng.uniform(0, max(1.0, height - th))
        distractors.append((dx, dy, _texture(rng, spec.target_size)))

    frames = []
    for t in range(spec.frames):
        x, y = motion_position(spec.motion, t)
        gt = BoundingBox(x, y, tw, th)
        rgb = rgb_bg.copy()
        thermal = thermal_bg.copy()
        for dx, dy, tex in distractors:
            _paste(rgb, tex, dx, dy)
        if not _in_span(spec.hidden_span, t):
            if not _in_span(spec.occlusion_span, t):
                _paste(rgb, target_tex, x, y)
            _paste(thermal, 230.0 * blob, x, y, alpha=(blob > 0).astype(np.float32))
        rgb += rng.normal(0, 4, size=rgb.shape)
        thermal += rng.normal(0, 3, size=thermal.shape)
        rgb8 = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
        th8 = np.clip(np.rint(thermal), 0, 255).astype(np.uint8)
        frames.append(RGBTFrame(rgb8, np.repeat(th8[..., None], 3, axis=2), gt))
    return Sequence(spec.name, frames, frozenset(spec.attributes))
