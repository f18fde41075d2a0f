"""Mask-supervised training of the global attention network."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np
import torch

from ..config import ATTENTION_INPUT_SIZE, BATCH_SIZE, EPOCHS, LEARNING_RATE
from ..data.patches import GroundTruthMask, make_mask
from ..errors import EmptyDatasetError, ShapeMismatchError
from .network import prepare_frame, prepare_template

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7


@dataclass
class AttentionSample:
    rgb_frame: torch.Tensor
    thermal_frame: torch.Tensor
    rgb_template: torch.Tensor
    thermal_template: torch.Tensor
    target: torch.Tensor  # 192 x 256, values in [0, 1]


@dataclass(frozen=True)
class AttentionTrainConfig:
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    iterations: int | None = None
    seed: int = 0


def mask_target(mask, size=ATTENTION_INPUT_SIZE) -> torch.Tensor:
    """A mask as a float target in [0, 1], nearest-resized to ``size`` (h, w)."""
    if isinstance(mask, GroundTruthMask):
        arr = mask.normalized()
    else:
        arr = np.asarray(mask, dtype=np.float32)
        if arr.max(initial=0) > 1:
            arr = arr / 255.0
    if arr.shape != tuple(size):
        arr = cv2.resize(arr, (size[1], size[0]), interpolation=cv2.INTER_NEAREST)
    return torch.from_numpy(np.ascontiguousarray(arr, dtype=np.float32))


def attention_training_loss(predicted, mask) -> torch.Tensor:
    """Mean per-pixel binary cross-entropy against a mask normalised to [0, 1]."""
    pred = torch.as_tensor(predicted)
    if isinstance(mask, GroundTruthMask):
        target = mask_target(mask, pred.shape[-2:])
    else:
        target = torch.as_tensor(mask, dtype=pred.dtype)
    target = target.to(pred.dtype)
    if pred.shape[-2:] != target.shape[-2:]:
        raise ShapeMismatchError(f"prediction {tuple(pred.shape)} vs mask {tuple(target.shape)}")
    pred = pred.reshape(-1, *pred.shape[-2:])
    target = target.reshape(-1, *target.shape[-2:]).expand_as(pred)
    p = pred.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    return -(target * torch.log(p) + (1 - target) * torch.log(1 - p)).mean()


def attention_logit_loss(logits: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Same cross-entropy computed from pre-sigmoid values.

    Unlike the clamped form this keeps a gradient when the sigmoid saturates.
    """
    if logits.shape[-2:] != target.shape[-2:]:
        raise ShapeMismatchError(f"prediction {tuple(logits.shape)} vs mask {tuple(target.shape)}")
    target = target.to(logits.dtype).expand_as(logits)
    return torch.nn.functional.binary_cross_entropy_with_logits(logits, target)


def build_attention_samples(sequences, polarity: str = "target_high",
                            frame_stride: int = 1) -> list[AttentionSample]:
    """Pair every annotated frame with its sequence's first-frame templates."""
    samples = []
    for seq in sequences:
        first = seq.frames[0]
        rgb0, th0 = first.images()
        rgb_tpl = prepare_template(rgb0, first.gt)
        th_tpl = prepare_template(th0, first.gt)
        for frame in seq.frames[::frame_stride]:
            if frame.gt is None:
                continue
            rgb, thermal = frame.images()
            try:
                mask = make_mask(rgb.shape[:2], frame.gt, polarity)
            except ValueError:
                continue
            samples.append(AttentionSample(prepare_frame(rgb), prepare_frame(thermal),
                                           rgb_tpl, th_tpl, mask_target(mask)))
    return samples


def _stack(samples, attr):
    return torch.stack([getattr(s, attr) for s in samples])


def train_attention_net(net, dataset, cfg: AttentionTrainConfig = AttentionTrainConfig()) -> list[float]:
    """Minimise the per-pixel cross-entropy with Adagrad; returns the loss trace."""
    if not dataset:
        raise EmptyDatasetError("attention training needs at least one sample")
    rng = np.random.default_rng(cfg.seed)
    per_epoch = math.ceil(len(dataset) / cfg.batch_size)
    total = cfg.iterations if cfg.iterations is not None else cfg.epochs * per_epoch
    optimizer = torch.optim.Adagrad(net.parameters(), lr=cfg.learning_rate)
    dtype = next(net.parameters()).dtype
    net.train()
    trace = []
    order = np.array([], dtype=int)
    for it in range(total):
        if len(order) == 0:
            order = rng.permutation(len(dataset))
        batch_idx, order = order[:cfg.batch_size], order[cfg.batch_size:]
        batch = [dataset[i] for i in batch_idx]
        inputs = [_stack(batch, a).to(dtype) for a in
                  ("rgb_frame", "thermal_frame", "rgb_template", "thermal_template")]
        target = _stack(batch, "target").to(dtype)
        optimizer.zero_grad()
        loss = attention_logit_loss(net.logits(*inputs)[:, 0], target)
        loss.backward()
        optimizer.step()
        trace.append(float(loss.detach()))
        if it % 10 == 0:
            log.debug("attention iter %d loss %.5f", it, trace[-1])
    net.eval()
    return trace
