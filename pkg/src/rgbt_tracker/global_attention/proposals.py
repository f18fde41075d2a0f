"""Global proposals from an attention map, and the proximity filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..config import MAX_CENTER_DISTANCE, MIN_OVERLAP
from ..geometry import BoundingBox, center_distance, iou


@dataclass(frozen=True)
class GlobalProposalFilter:
    max_center_distance: float = MAX_CENTER_DISTANCE
    min_overlap: float = MIN_OVERLAP

    def __post_init__(self):
        if self.max_center_distance <= 0:
            raise ValueError("max_center_distance must be positive")
        if not 0 <= self.min_overlap <= 1:
            raise ValueError("min_overlap must lie in [0, 1]")

    def accepts(self, proposal: BoundingBox, prev_result: BoundingBox) -> bool:
        return (center_distance(proposal, prev_result) <= self.max_center_distance
                and iou(proposal, prev_result) >= self.min_overlap)


def extract_global_proposals(attention_map, k: int, frame_size, template_box_size,
                             threshold_ratio: float = 0.5, floor: float = 0.1) -> list[BoundingBox]:
    """One box per bright connected region of the map, best ``k`` first.

    The map is binarised at ``max(threshold_ratio * max, floor)``. Each
    4-connected component yields a box of ``template_box_size`` (w, h)
    centred on the component's pixel centroid, mapped from map to frame
    coordinates. Components are ranked by mean attention; ties go to the
    top-most, then left-most centroid.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    amap = np.asarray(attention_map, dtype=np.float64)
    peak = float(amap.max()) if amap.size else 0.0
    tau = max(threshold_ratio * peak, floor)
    if peak <= 0 or peak < tau:
        return []
    labels, n = ndimage.label(amap >= tau)
    if n == 0:
        return []
    index = np.arange(1, n + 1)
    means = ndimage.mean(amap, labels, index)
    rows, cols = zip(*ndimage.center_of_mass(np.ones_like(amap), labels, index))
    map_h, map_w = amap.shape
    height, width = frame_size
    sx, sy = width / map_w, height / map_h
    cx = (np.asarray(cols) + 0.5) * sx
    cy = (np.asarray(rows) + 0.5) * sy
    order = np.lexsort((cx, cy, -np.asarray(means)))[:k]
    tw, th = template_box_size
    out = []
    for i in order:
        box = BoundingBox.from_center(cx[i], cy[i], tw, th)
        out.append(box.clamp(frame_size))
    return out


def filter_global_proposals(proposals, prev_result: BoundingBox,
                            f: GlobalProposalFilter = GlobalProposalFilter()) -> list[BoundingBox]:
    """Keep proposals near the previous result (distance and overlap), in order."""
    return [p for p in proposals if f.accepts(p, prev_result)]
