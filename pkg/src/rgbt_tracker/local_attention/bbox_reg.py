"""Ridge bounding-box regression on conv features."""

from __future__ import annotations

import numpy as np

from ..errors import NotFittedError
from ..geometry import BoundingBox, boxes_to_array, clamp_boxes


def box_deltas(boxes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Center offsets normalised by box size and log size ratios."""
    bw, bh = boxes[:, 2], boxes[:, 3]
    bcx, bcy = boxes[:, 0] + bw / 2, boxes[:, 1] + bh / 2
    tcx, tcy = targets[:, 0] + targets[:, 2] / 2, targets[:, 1] + targets[:, 3] / 2
    return np.stack([(tcx - bcx) / bw, (tcy - bcy) / bh,
                     np.log(targets[:, 2] / bw), np.log(targets[:, 3] / bh)], axis=1)


def apply_deltas(boxes: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    bw, bh = boxes[:, 2], boxes[:, 3]
    cx = boxes[:, 0] + bw / 2 + deltas[:, 0] * bw
    cy = boxes[:, 1] + bh / 2 + deltas[:, 1] * bh
    w = bw * np.exp(deltas[:, 2])
    h = bh * np.exp(deltas[:, 3])
    return np.stack([cx - w / 2, cy - h / 2, w, h], axis=1)


class BBoxRegressor:
    """Linear map from features to box deltas, fitted by ridge regression.

    The intercept is not penalised (features and targets are centred first).
    """

    def __init__(self, alpha: float = 1000.0):
        self.alpha = alpha
        self.weights: np.ndarray | None = None
        self.bias: np.ndarray | None = None

    @classmethod
    def identity(cls, n_features: int) -> "BBoxRegressor":
        reg = cls()
        reg.weights = np.zeros((n_features, 4))
        reg.bias = np.zeros(4)
        return reg

    @property
    def fitted(self) -> bool:
        return self.weights is not None

    def fit(self, features, boxes, gt) -> "BBoxRegressor":
        x = np.asarray(features, dtype=np.float64)
        boxes = boxes_to_array(boxes)
        gt_arr = np.broadcast_to(boxes_to_array([gt]) if isinstance(gt, BoundingBox)
                                 else boxes_to_array(gt), boxes.shape)
        y = box_deltas(boxes, gt_arr)
        x_mean, y_mean = x.mean(axis=0), y.mean(axis=0)
        xc, yc = x - x_mean, y - y_mean
        n, d = xc.shape
        if d <= n:
            w = np.linalg.solve(xc.T @ xc + self.alpha * np.eye(d), xc.T @ yc)
        else:
            w = xc.T @ np.linalg.solve(xc @ xc.T + self.alpha * np.eye(n), yc)
        self.weights = w
        self.bias = y_mean - x_mean @ w
        return self

    def predict(self, features, boxes, frame_size=None) -> np.ndarray:
        if not self.fitted:
            raise NotFittedError("bounding-box regressor has not been fitted")
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        out = apply_deltas(boxes_to_array(boxes), x @ self.weights + self.bias)
        if frame_size is not None:
            out = clamp_boxes(out, frame_size)
        return out

    def state_dict(self) -> dict:
        if not self.fitted:
            raise NotFittedError("bounding-box regressor has not been fitted")
        return {"weights": self.weights, "bias": self.bias, "alpha": np.array(self.alpha)}

    @classmethod
    def from_state_dict(cls, state) -> "BBoxRegressor":
        reg = cls(float(state["alpha"]))
        reg.weights = np.asarray(state["weights"], dtype=np.float64)
        reg.bias = np.asarray(state["bias"], dtype=np.float64)
        return reg


def bbox_regress(regressor: BBoxRegressor, box: BoundingBox, features,
                 frame_size=None) -> BoundingBox:
    """Refine one box; the result is clamped into ``frame_size`` when given."""
    features = np.asarray(features.detach().cpu() if hasattr(features, "detach") else features)
    out = regressor.predict(features.reshape(1, -1), [box], frame_size)
    if frame_size is None:
        out[:, 2:] = np.maximum(out[:, 2:], 1e-3)
    return BoundingBox(*out[0])
