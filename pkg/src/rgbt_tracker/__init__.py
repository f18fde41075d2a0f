"""RGB-thermal object tracking with gradient-attention regularised classifiers
and a target-conditioned global attention network."""

from .config import RunConfig
from .evaluation import (Metrics, TrackingResult, curves, lambda_sweep, precision_rate,
                         success_rate)
from .geometry import BoundingBox, center_distance, iou
from .pipeline import TrackerState, init, run_sequence, track_frame

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "Metrics", "RunConfig", "TrackerState", "TrackingResult", "center_distance",
    "curves", "init", "iou", "lambda_sweep", "precision_rate", "run_sequence", "success_rate",
    "track_frame",
]
