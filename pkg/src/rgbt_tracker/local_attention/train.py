"""First-frame classifier training and online updates."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch

from ..config import RunConfig
from ..data.patches import crop_pair_patches, image_to_tensor
from ..geometry import TrainingSampleConfig, sample_training_box_arrays
from .bbox_reg import BBoxRegressor
from .losses import classification_loss, loss_terms

log = logging.getLogger(__name__)

FEATURE_CHUNK = 256


@dataclass
class TrainResult:
    net: torch.nn.Module
    regressor: BBoxRegressor
    trace: list = field(default_factory=list)
    pos_boxes: np.ndarray | None = None
    neg_boxes: np.ndarray | None = None


class FrameImages:
    """A frame converted once to tensors for repeated cropping."""

    def __init__(self, frame, patch_size: int, padding: float):
        rgb, thermal = frame.images()
        self.size = rgb.shape[:2]
        self.rgb = image_to_tensor(rgb)
        self.thermal = image_to_tensor(thermal)
        self.out_size = (patch_size, patch_size)
        self.padding = padding

    def crop(self, boxes, dtype=torch.float32):
        r, t = crop_pair_patches(self.rgb, self.thermal, boxes, self.out_size, self.padding)
        return r.to(dtype), t.to(dtype)


def _dtype(net) -> torch.dtype:
    return next(net.parameters()).dtype


@torch.no_grad()
def extract_features(net, images: FrameImages, boxes) -> torch.Tensor:
    dtype = _dtype(net)
    chunks = []
    for start in range(0, len(boxes), FEATURE_CHUNK):
        r, t = images.crop(boxes[start:start + FEATURE_CHUNK], dtype)
        chunks.append(net.features(r, t))
    if not chunks:
        return torch.zeros((0, net.feature_dim), dtype=dtype)
    return torch.cat(chunks)


@torch.no_grad()
def score_boxes(net, images: FrameImages, boxes, domain: int = 0):
    """Conv features and ``(pos, neg)`` scores for each box."""
    feats = extract_features(net, images, boxes)
    return feats, net.head(feats, domain)


def _batch_split(cfg: RunConfig) -> tuple[int, int]:
    n_pos = max(1, int(round(cfg.batch_size * cfg.pos_fraction)))
    return n_pos, max(1, cfg.batch_size - n_pos)


def _pick(rng, n_available: int, n: int) -> np.ndarray:
    if n_available <= n:
        return np.arange(n_available)
    return rng.choice(n_available, size=n, replace=False)


def _hard_negatives(net, neg_scores_fn, rng, n_available, n, pool):
    candidates = _pick(rng, n_available, max(pool, n))
    with torch.no_grad():
        scores = neg_scores_fn(candidates)[:, 0]
    order = torch.argsort(scores, descending=True, stable=True).numpy()
    return candidates[order[:n]]


def train_first_frame(net, frame0, cfg: RunConfig, seed: int | None = None) -> TrainResult:
    """Fit the classifier and a bounding-box regressor on the first frame.

    Samples come from :func:`sample_training_box_arrays`; every iteration
    minimises the regularized loss on a fresh mini-batch with Adagrad.
    """
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng([seed, 1])
    images = FrameImages(frame0, cfg.patch_size, cfg.padding)
    dtype = _dtype(net)
    pos_boxes, neg_boxes = sample_training_box_arrays(
        frame0.gt, cfg.init_pos, cfg.init_neg, [seed, 2], images.size)
    loss_cfg = cfg.loss_config()
    n_pos_b, n_neg_b = _batch_split(cfg)

    def neg_scores(idx):
        r, t = images.crop(neg_boxes[idx], dtype)
        return net(r, t)

    optimizer = torch.optim.Adagrad(net.parameters(), lr=cfg.learning_rate)
    trace = []
    for it in range(cfg.init_iterations):
        pi = _pick(rng, len(pos_boxes), n_pos_b)
        if cfg.hard_negative_pool > n_neg_b:
            ni = _hard_negatives(net, neg_scores, rng, len(neg_boxes), n_neg_b,
                                 cfg.hard_negative_pool)
        else:
            ni = _pick(rng, len(neg_boxes), n_neg_b)
        r, t = images.crop(np.concatenate([pos_boxes[pi], neg_boxes[ni]]), dtype)
        y = [1.0] * len(pi) + [0.0] * len(ni)
        optimizer.zero_grad()
        terms = loss_terms(net, (r, t), y, loss_cfg)
        terms.total.backward()
        optimizer.step()
        trace.append(float(terms.total.detach()))
        log.debug("init iter %d loss %.4f (ce %.4f, reg %.4f)", it, trace[-1],
                  terms.classification.item(), terms.regularization.item())
    optimizer.zero_grad(set_to_none=True)

    regressor = fit_bbox_regressor(net, images, frame0.gt, cfg, seed)
    return TrainResult(net, regressor, trace, pos_boxes, neg_boxes)


def fit_bbox_regressor(net, images: FrameImages, gt, cfg: RunConfig, seed: int) -> BBoxRegressor:
    sampler = TrainingSampleConfig(pos_translation_sigma=0.3, pos_scale_sigma=0.5)
    boxes, _ = sample_training_box_arrays(gt, cfg.bbox_reg_samples, 0, [seed, 3], images.size,
                                          sampler, pos_range=(cfg.bbox_reg_min_iou, 1.0))
    feats = extract_features(net, images, boxes).double().numpy()
    return BBoxRegressor(cfg.bbox_reg_alpha).fit(feats, boxes, gt)


class SampleStore:
    """Per-frame conv features of positive and negative samples, FIFO-bounded."""

    def __init__(self, pos_capacity: int = 100, neg_capacity: int = 300):
        self.pos = deque(maxlen=pos_capacity)
        self.neg = deque(maxlen=neg_capacity)

    def add(self, pos_features: torch.Tensor, neg_features: torch.Tensor):
        if len(pos_features):
            self.pos.append(pos_features.detach())
        if len(neg_features):
            self.neg.append(neg_features.detach())

    def __len__(self):
        return len(self.pos) + len(self.neg)

    def gather(self, last: int | None = None) -> tuple[torch.Tensor | None, torch.Tensor | None]:
        def cat(frames):
            frames = list(frames)
            if last is not None:
                frames = frames[-last:]
            return torch.cat(frames) if frames else None
        return cat(self.pos), cat(self.neg)


def online_update(net, store: SampleStore, cfg: RunConfig, last_frames: int | None = None,
                  seed: int = 0, iterations: int | None = None) -> list[float]:
    """Fine-tune the fully connected layers on stored features (no attention term).

    Convolutional weights are untouched. Returns the per-iteration loss trace;
    an empty store leaves the network unchanged.
    """
    pos, neg = store.gather(last_frames)
    if pos is None or neg is None:
        return []
    rng = np.random.default_rng([seed, 4])
    n_pos_b, n_neg_b = _batch_split(cfg)
    params = net.fc_parameters()
    optimizer = torch.optim.Adagrad(params, lr=cfg.learning_rate)
    trace = []
    for _ in range(cfg.update_iterations if iterations is None else iterations):
        pi = _pick(rng, len(pos), n_pos_b)
        if cfg.hard_negative_pool > n_neg_b:
            ni = _hard_negatives(net, lambda idx: net.head(neg[idx]), rng, len(neg), n_neg_b,
                                 cfg.hard_negative_pool)
        else:
            ni = _pick(rng, len(neg), n_neg_b)
        feats = torch.cat([pos[pi], neg[ni]])
        labels = [1.0] * len(pi) + [0.0] * len(ni)
        optimizer.zero_grad()
        loss = classification_loss(net.head(feats), labels)
        loss.backward()
        optimizer.step()
        trace.append(float(loss.detach()))
    optimizer.zero_grad(set_to_none=True)
    return trace

