"""End-to-end RGB-T tracking: initialise on frame 0, then score proposals per frame."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import RunConfig
from .errors import UninitializedStateError
from .geometry import (BoundingBox, array_to_boxes, boxes_to_array, iou_many,
                       sample_proposal_array, sample_training_box_arrays)
from .global_attention.network import estimate_attention, prepare_frame, prepare_template
from .global_attention.proposals import extract_global_proposals, filter_global_proposals
from .local_attention.bbox_reg import BBoxRegressor, bbox_regress
from .local_attention.network import build_network
from .local_attention.train import (FrameImages, SampleStore, extract_features, online_update,
                                    score_boxes, train_first_frame)

log = logging.getLogger(__name__)


@dataclass
class FrameDiagnostics:
    frame_index: int
    lam: float
    n_local: int
    n_global_raw: int = 0
    n_global_kept: int = 0
    global_candidates: list = field(default_factory=list)
    scores: np.ndarray | None = None
    winner_index: int = -1
    winner_is_global: bool = False
    success: bool = False
    held: bool = False
    update: str | None = None
    attention_map: np.ndarray | None = None

    @property
    def n_candidates(self) -> int:
        return self.n_local + self.n_global_kept


@dataclass
class TrackerState:
    net: torch.nn.Module
    regressor: BBoxRegressor
    prev_result: BoundingBox
    config: RunConfig
    frame_size: tuple[int, int]
    attention_net: torch.nn.Module | None = None
    templates: tuple | None = None
    stored_samples: SampleStore = field(default_factory=SampleStore)
    frame_index: int = 0
    init_trace: list = field(default_factory=list)


def _store_samples(state: TrackerState, images: FrameImages, box: BoundingBox, seed):
    cfg = state.config
    pos, neg = sample_training_box_arrays(box, cfg.update_pos, cfg.update_neg, seed, images.size)
    feats = extract_features(state.net, images, np.concatenate([pos, neg]))
    state.stored_samples.add(feats[:len(pos)], feats[len(pos):])


def init(frame0, cfg: RunConfig, attention_net=None) -> TrackerState:
    """Train the classifier and regressor on ``frame0`` and set up the state.

    ``attention_net`` is only kept when ``cfg.use_global_attention`` is set.
    """
    if frame0.gt is None:
        raise ValueError("the first frame needs a ground-truth box")
    net = build_network(cfg.network_config(), seed=cfg.seed)
    result = train_first_frame(net, frame0, cfg, seed=cfg.seed)
    rgb, thermal = frame0.images()
    state = TrackerState(
        net=result.net,
        regressor=result.regressor,
        prev_result=frame0.gt,
        config=cfg,
        frame_size=rgb.shape[:2],
        stored_samples=SampleStore(cfg.pos_capacity, cfg.neg_capacity),
        init_trace=result.trace,
    )
    if attention_net is not None and cfg.use_global_attention:
        state.attention_net = attention_net.eval()
        state.templates = (prepare_template(rgb, frame0.gt), prepare_template(thermal, frame0.gt))
    images = FrameImages(frame0, cfg.patch_size, cfg.padding)
    _store_samples(state, images, frame0.gt, [cfg.seed, 0, 5])
    return state


def _global_candidates(state: TrackerState, frame, diag: FrameDiagnostics):
    cfg = state.config
    rgb, thermal = frame.images()
    amap = estimate_attention(state.attention_net, prepare_frame(rgb), prepare_frame(thermal),
                              *state.templates)
    if cfg.mask_polarity == "target_low":
        amap = 1.0 - amap
    diag.attention_map = amap
    prev = state.prev_result
    raw = extract_global_proposals(amap, cfg.global_k, state.frame_size, (prev.w, prev.h),
                                   cfg.attention_threshold, cfg.attention_floor)
    kept = filter_global_proposals(raw, prev, cfg.filter_config())
    if __debug__:
        f = cfg.filter_config()
        assert all(f.accepts(p, prev) for p in kept)
    diag.n_global_raw = len(raw)
    diag.n_global_kept = len(kept)
    diag.global_candidates = kept
    return kept


def select_winner(scores: np.ndarray, candidates: np.ndarray, prev_result: BoundingBox) -> int:
    """Index of the highest score; ties go to larger IoU with ``prev_result``, then first."""
    overlaps = iou_many(candidates, prev_result)
    order = np.lexsort((np.arange(len(scores)), -overlaps, -np.asarray(scores)))
    return int(order[0])


def track_frame(state: TrackerState, frame, want_global: bool | None = None):
    """Locate the target in ``frame``; returns ``(box, FrameDiagnostics)``."""
    if state is None or not isinstance(state, TrackerState):
        raise UninitializedStateError("call init() on the first frame before track_frame()")
    cfg = state.config
    t = state.frame_index + 1
    diag = FrameDiagnostics(frame_index=t, lam=cfg.effective_lambda, n_local=cfg.n_proposals)
    images = FrameImages(frame, cfg.patch_size, cfg.padding)
    state.frame_size = images.size
    local = sample_proposal_array(state.prev_result, cfg.proposal_config(), [cfg.seed, t, 1],
                                  images.size)
    feats, scores = score_boxes(state.net, images, local)
    pos_scores = scores[:, 0].double().numpy()
    candidates = local

    use_global = state.attention_net is not None and cfg.use_global_attention
    if want_global is not None:
        use_global = use_global and want_global
    if use_global and not cfg.global_every_frame:
        use_global = pos_scores.max() <= cfg.confidence_threshold
    glob = _global_candidates(state, frame, diag) if use_global else []
    if glob:
        g_arr = boxes_to_array(glob)
        g_feats, g_scores = score_boxes(state.net, images, g_arr)
        candidates = np.concatenate([local, g_arr])
        feats = torch.cat([feats, g_feats])
        pos_scores = np.concatenate([pos_scores, g_scores[:, 0].double().numpy()])
    diag.scores = pos_scores
    winner = select_winner(pos_scores, candidates, state.prev_result)
    diag.winner_index = winner
    diag.winner_is_global = winner >= len(local)
    diag.success = bool(pos_scores[winner] > cfg.confidence_threshold)

    winner_box = array_to_boxes(candidates[winner:winner + 1])[0]
    if diag.success:
        result = bbox_regress(state.regressor, winner_box, feats[winner].double(), images.size)
    elif not glob:
        result = state.prev_result
        diag.held = True
    else:
        result = winner_box.clamp(images.size)

    if diag.success:
        _store_samples(state, images, result, [cfg.seed, t, 2])
    if not diag.success:
        diag.update = "short"
        online_update(state.net, state.stored_samples, cfg, cfg.short_term_frames, seed=cfg.seed + t)
    elif t % cfg.long_term_interval == 0:
        diag.update = "long"
        online_update(state.net, state.stored_samples, cfg, None, seed=cfg.seed + t)

    state.prev_result = result
    state.frame_index = t
    return result, diag


def run_sequence(seq, cfg: RunConfig, attention_net=None, diagnostics: list | None = None,
                 on_frame=None) -> list[BoundingBox]:
    """Track a whole sequence; frame 0 reports its ground truth.

    Per-frame :class:`FrameDiagnostics` are appended to ``diagnostics`` when a
    list is given; ``on_frame(index, box, diag)`` is called after each frame.
    """
    frames = seq.frames
    results = [frames[0].gt]
    if len(frames) == 1:
        return results
    state = init(frames[0], cfg, attention_net)
    for idx, frame in enumerate(frames[1:], 1):
        box, diag = track_frame(state, frame)
        results.append(box)
        if diagnostics is not None:
            diagnostics.append(diag)
        if on_frame is not None:
            on_frame(idx, box, diag)
        log.debug("%s frame %d: %s score %.3f", seq.name, idx, box,
                  diag.scores[diag.winner_index])
    return results


def format_box(box: BoundingBox) -> str:
    return ",".join(f"{v:.4f}" for v in box.as_tuple())


def write_results(path, boxes) -> Path:
    """One ``x,y,w,h`` line per frame."""
    path = Path(path)
    path.write_text("".join(format_box(b) + "\n" for b in boxes))
    return path
