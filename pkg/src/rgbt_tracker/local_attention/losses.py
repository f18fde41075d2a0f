"""Classification loss, gradient attention maps and attention regularizers.

The attention maps are absolute input gradients of the class scores. Built
with ``create_graph=True`` they stay differentiable w.r.t. the network
parameters, so the regularized loss trains through a double backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from ..config import BATCH_SIZE, EPSILON
from ..data.patches import SamplePair
from ..errors import GradientUnavailableError

LOG_PROB_FLOOR = math.log(1e-12)


@dataclass(frozen=True)
class LossConfig:
    lam: float = 1.0
    epsilon: float = EPSILON
    batch_size: int = BATCH_SIZE

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AttentionMaps:
    """Positive/negative attention maps, ``N x H x W`` (or ``H x W``), non-negative."""

    positive: torch.Tensor
    negative: torch.Tensor
    per_modality: dict = field(default_factory=dict)
    scores: torch.Tensor | None = None


def as_batch(batch):
    """Accept a SamplePair, a list of them, or an ``(rgb, thermal)`` tensor pair."""
    if isinstance(batch, SamplePair):
        return batch.rgb_patch.unsqueeze(0), batch.thermal_patch.unsqueeze(0)
    if isinstance(batch, (list, tuple)) and batch and isinstance(batch[0], SamplePair):
        return (torch.stack([p.rgb_patch for p in batch]),
                torch.stack([p.thermal_patch for p in batch]))
    rgb, thermal = batch
    return rgb, thermal


def forward_score(net, batch, domain: int = 0) -> torch.Tensor:
    """``N x 2`` tensor of ``(pos_score, neg_score)`` rows."""
    rgb, thermal = as_batch(batch)
    return net(rgb, thermal, domain)


def positive_probability(scores: torch.Tensor) -> torch.Tensor:
    return torch.softmax(scores, dim=1)[:, 0]


def classification_loss(scores: torch.Tensor, labels) -> torch.Tensor:
    """Binary cross-entropy summed over the batch; ``P`` is the softmax of the pair."""
    labels = torch.as_tensor(labels, dtype=scores.dtype, device=scores.device)
    if labels.shape[0] != scores.shape[0]:
        raise ValueError(f"{scores.shape[0]} score rows but {labels.shape[0]} labels")
    log_p = F.log_softmax(scores, dim=1).clamp_min(LOG_PROB_FLOOR)
    return -(labels * log_p[:, 0] + (1 - labels) * log_p[:, 1]).sum()


def _combine(grad_rgb, grad_thermal, like):
    maps = []
    for g, x in ((grad_rgb, like[0]), (grad_thermal, like[1])):
        if g is None:
            g = torch.zeros_like(x)
        maps.append(g.abs().mean(dim=1))
    return (maps[0] + maps[1]) / 2, maps


def compute_attention_maps(net, batch, create_graph: bool = False, domain: int = 0) -> AttentionMaps:
    """Gradient attention maps of the positive and negative scores.

    Each map is ``|d score / d input|`` averaged over colour channels and then
    over the two modalities; it has the spatial size of the input patch.
    """
    if not torch.is_grad_enabled():
        raise GradientUnavailableError("attention maps need autograd; called under no_grad()")
    rgb, thermal = as_batch(batch)
    rgb = rgb.detach().requires_grad_(True)
    thermal = thermal.detach().requires_grad_(True)
    scores = net(rgb, thermal, domain)
    if not scores.requires_grad:
        zero = torch.zeros_like(rgb[:, 0])
        return AttentionMaps(zero, zero.clone(), {}, scores)
    inputs = (rgb, thermal)
    g_pos = torch.autograd.grad(scores[:, 0].sum(), inputs, create_graph=create_graph,
                                retain_graph=True, allow_unused=True)
    g_neg = torch.autograd.grad(scores[:, 1].sum(), inputs, create_graph=create_graph,
                                retain_graph=create_graph, allow_unused=True)
    a_p, pos_parts = _combine(*g_pos, inputs)
    a_n, neg_parts = _combine(*g_neg, inputs)
    per_modality = {"rgb": (pos_parts[0], neg_parts[0]), "thermal": (pos_parts[1], neg_parts[1])}
    if not create_graph:
        scores = scores.detach()
    return AttentionMaps(a_p, a_n, per_modality, scores)


def _safe_sqrt(x: torch.Tensor) -> torch.Tensor:
    # exact value, zero (not NaN) gradient at x == 0
    positive = x > 0
    return torch.where(positive, x.clamp_min(torch.finfo(x.dtype).tiny).sqrt(), x * 0)


def map_stats(a: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Mean and population standard deviation over the last two axes."""
    flat = a.flatten(-2)
    mu = flat.mean(dim=-1)
    var = ((flat - mu.unsqueeze(-1)) ** 2).mean(dim=-1)
    return mu, _safe_sqrt(var)


def regularizer_positive(maps: AttentionMaps, eps: float = EPSILON) -> torch.Tensor:
    """``sigma(A_p)/(mu(A_p)+eps) + mu(A_n)/(sigma(A_n)+eps)``, per sample."""
    mu_p, sd_p = map_stats(maps.positive)
    mu_n, sd_n = map_stats(maps.negative)
    return sd_p / (mu_p + eps) + mu_n / (sd_n + eps)


def regularizer_negative(maps: AttentionMaps, eps: float = EPSILON) -> torch.Tensor:
    """``mu(A_p)/(sigma(A_p)+eps) + sigma(A_n)/(mu(A_n)+eps)``, per sample."""
    mu_p, sd_p = map_stats(maps.positive)
    mu_n, sd_n = map_stats(maps.negative)
    return mu_p / (sd_p + eps) + sd_n / (mu_n + eps)


@dataclass
class LossTerms:
    total: torch.Tensor
    classification: torch.Tensor
    regularization: torch.Tensor
    maps: AttentionMaps | None = None


def loss_terms(net, batch, labels, cfg: LossConfig = LossConfig(), domain: int = 0) -> LossTerms:
    rgb, thermal = as_batch(batch)
    if cfg.lam == 0:
        scores = net(rgb, thermal, domain)
        lc = classification_loss(scores, labels)
        return LossTerms(lc, lc, torch.zeros((), dtype=lc.dtype))
    maps = compute_attention_maps(net, (rgb, thermal), create_graph=True, domain=domain)
    lc = classification_loss(maps.scores, labels)
    y = torch.as_tensor(labels, dtype=lc.dtype)
    reg = (y * regularizer_positive(maps, cfg.epsilon)
           + (1 - y) * regularizer_negative(maps, cfg.epsilon)).sum()
    return LossTerms(lc + cfg.lam * reg, lc, reg, maps)


def total_loss(net, batch, labels, cfg: LossConfig = LossConfig(), domain: int = 0) -> torch.Tensor:
    """Cross-entropy plus ``lam`` times the label-selected attention regularizer.

    The regularizer is summed over the batch, matching the summed
    cross-entropy. With ``lam == 0`` no attention maps are computed and the
    result is exactly :func:`classification_loss`.
    """
    return loss_terms(net, batch, labels, cfg, domain).total
