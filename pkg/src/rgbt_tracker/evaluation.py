"""Precision/success metrics, curves, attribute breakdowns and the lambda sweep."""

from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import PRECISION_THRESHOLD_PX, REFERENCE_LAMBDA_TABLE, SUCCESS_THRESHOLD, RunConfig
from .data.dataset import KNOWN_ATTRIBUTES
from .errors import LengthMismatchError
from .geometry import BoundingBox, center_distance, iou

PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
SUCCESS_THRESHOLDS = np.arange(51) / 50.0


@dataclass
class TrackingResult:
    name: str
    predictions: list
    ground_truth: list

    def __post_init__(self):
        if len(self.predictions) != len(self.ground_truth):
            raise LengthMismatchError(
                f"{self.name}: {len(self.predictions)} predictions for "
                f"{len(self.ground_truth)} ground-truth frames")

    def frame_pairs(self, include_first_frame: bool = True):
        """(prediction, gt) pairs for frames with ground truth."""
        start = 0 if include_first_frame else 1
        return [(p, g) for p, g in zip(self.predictions[start:], self.ground_truth[start:])
                if g is not None]

    def distances(self, include_first_frame: bool = True) -> np.ndarray:
        return np.array([center_distance(p, g) for p, g in self.frame_pairs(include_first_frame)])

    def overlaps(self, include_first_frame: bool = True) -> np.ndarray:
        return np.array([iou(p, g) for p, g in self.frame_pairs(include_first_frame)])


def _nonempty(values: np.ndarray, name: str):
    if values.size == 0:
        raise ValueError(f"{name}: no frames with ground truth to evaluate")
    return values


def precision_rate(result: TrackingResult, dist_threshold: float = PRECISION_THRESHOLD_PX,
                   include_first_frame: bool = True) -> float:
    """Fraction of frames whose predicted center is within ``dist_threshold`` px."""
    d = _nonempty(result.distances(include_first_frame), result.name)
    return float(np.mean(d <= dist_threshold))


def success_rate(result: TrackingResult, iou_threshold: float = SUCCESS_THRESHOLD,
                 include_first_frame: bool = True) -> float:
    """Fraction of frames with IoU at least ``iou_threshold``."""
    o = _nonempty(result.overlaps(include_first_frame), result.name)
    return float(np.mean(o >= iou_threshold))


@dataclass
class Curves:
    precision_thresholds: np.ndarray
    precision: np.ndarray
    success_thresholds: np.ndarray
    success: np.ndarray

    @property
    def auc(self) -> float:
        return float(np.mean(self.success))


def curves_from_arrays(distances: np.ndarray, overlaps: np.ndarray) -> Curves:
    precision = (distances[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    success = (overlaps[None, :] >= SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return Curves(PRECISION_THRESHOLDS, precision, SUCCESS_THRESHOLDS, success)


def curves(result: TrackingResult, include_first_frame: bool = True) -> Curves:
    """Precision over 0..50 px and success over 51 IoU thresholds in [0, 1].

    AUC is the plain mean of the 51 success samples.
    """
    d = _nonempty(result.distances(include_first_frame), result.name)
    return curves_from_arrays(d, result.overlaps(include_first_frame))


@dataclass
class Metrics:
    pr: float
    sr: float
    auc: float
    frames: int
    sequences: int = 1


def pooled_metrics(results, dist_threshold=PRECISION_THRESHOLD_PX, iou_threshold=SUCCESS_THRESHOLD,
                   include_first_frame: bool = True) -> Metrics:
    """Metrics over all frames of all results (frame-weighted)."""
    d = np.concatenate([r.distances(include_first_frame) for r in results])
    o = np.concatenate([r.overlaps(include_first_frame) for r in results])
    _nonempty(d, "pooled results")
    c = curves_from_arrays(d, o)
    return Metrics(float(np.mean(d <= dist_threshold)), float(np.mean(o >= iou_threshold)),
                   c.auc, len(d), len(results))


def attribute_report(results, sequences, dist_threshold=PRECISION_THRESHOLD_PX,
                     iou_threshold=SUCCESS_THRESHOLD,
                     include_first_frame: bool = True) -> dict[str, Metrics]:
    """Frame-weighted metrics per attribute tag over the sequences carrying it."""
    by_name = {s.name: s for s in sequences}
    groups: dict[str, list] = {}
    for res in results:
        seq = by_name.get(res.name)
        if seq is None:
            raise KeyError(f"no sequence named {res.name!r}")
        for tag in seq.attributes:
            if tag not in KNOWN_ATTRIBUTES:
                warnings.warn(f"{seq.name}: unknown attribute tag {tag!r}", stacklevel=2)
            groups.setdefault(tag, []).append(res)
    return {tag: pooled_metrics(rs, dist_threshold, iou_threshold, include_first_frame)
            for tag, rs in sorted(groups.items())}


@dataclass
class SweepRow:
    lam: float
    metrics: Metrics
    results: list


def lambda_sweep(sequences, lambdas, cfg: RunConfig | None = None, attention_net=None,
                 runner=None) -> list[SweepRow]:
    """Track every sequence once per lambda and pool PR/SR over all frames."""
    from .pipeline import run_sequence

    cfg = cfg or RunConfig()
    runner = runner or run_sequence
    rows = []
    for lam in lambdas:
        run_cfg = cfg.replace(lam=float(lam), use_local_attention=float(lam) > 0)
        results = []
        for seq in sequences:
            boxes = runner(seq, run_cfg, attention_net)
            results.append(TrackingResult(seq.name, boxes, seq.ground_truth))
        metrics = pooled_metrics(results, cfg.precision_threshold, cfg.success_threshold,
                                 cfg.include_first_frame)
        rows.append(SweepRow(float(lam), metrics, results))
    return rows


def format_sweep_table(rows, reference: dict | None = REFERENCE_LAMBDA_TABLE) -> str:
    """Rows lambda/PR/SR with values x100; reference values appended when known."""
    def num(v):
        return f"{v:g}"

    header = ["lambda"] + [num(r.lam) for r in rows]
    lines = [header,
             ["PR"] + [f"{100 * r.metrics.pr:.1f}" for r in rows],
             ["SR"] + [f"{100 * r.metrics.sr:.1f}" for r in rows],
             ["AUC"] + [f"{100 * r.metrics.auc:.1f}" for r in rows]]
    if reference:
        ref = [reference.get(int(r.lam)) if float(r.lam).is_integer() else None for r in rows]
        if any(ref):
            lines.append(["ref PR"] + [f"{v[0]:.1f}" if v else "-" for v in ref])
            lines.append(["ref SR"] + [f"{v[1]:.1f}" if v else "-" for v in ref])
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    return "\n".join(" | ".join(cell.rjust(w) for cell, w in zip(line, widths)) for line in lines) + "\n"


# -- file formats ------------------------------------------------------------

_SPLIT = re.compile(r"[,\s]+")


def read_results(path) -> list[BoundingBox]:
    """Read ``x,y,w,h`` lines (comma or whitespace separated)."""
    boxes = []
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), 1):
        text = raw.strip()
        if not text:
            continue
        values = [float(t) for t in _SPLIT.split(text) if t]
        if len(values) != 4:
            raise ValueError(f"{path}:{line_no}: expected 4 numbers, got {raw!r}")
        boxes.append(BoundingBox(*values))
    return boxes


def write_curves(out_dir, name: str, c: Curves):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{name}_precision.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "value"])
        w.writerows(zip(c.precision_thresholds.tolist(), c.precision.tolist()))
    with open(out_dir / f"{name}_success.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "value"])
        w.writerows(zip(c.success_thresholds.tolist(), c.success.tolist()))


def plot_curves(path, named_curves: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_p, ax_s) = plt.subplots(1, 2, figsize=(10, 4))
    for name, c in named_curves.items():
        ax_p.plot(c.precision_thresholds, c.precision, label=name)
        ax_s.plot(c.success_thresholds, c.success, label=f"{name} [{c.auc:.3f}]")
    ax_p.set(xlabel="Location error threshold (px)", ylabel="Precision", title="Precision plot")
    ax_s.set(xlabel="Overlap threshold", ylabel="Success rate", title="Success plot")
    for ax in (ax_p, ax_s):
        ax.grid(alpha=0.3)
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
