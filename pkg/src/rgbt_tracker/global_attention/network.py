"""Target-driven global attention network.

Four inputs (RGB frame, thermal frame, RGB template, thermal template), each
192x256x3, pass through a truncated VGG-style encoder to 12x16x512 feature
maps. Their 2048-channel concatenation is upsampled back to a 192x256
single-channel attention map in [0, 1].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..config import (ATTENTION_FEATURE_CHANNELS, ATTENTION_FEATURE_SIZE, ATTENTION_INPUT_SIZE,
                      ATTENTION_INPUTS)
from ..data.patches import crop_patches, normalize_pixels
from ..errors import ShapeMismatchError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttentionNetConfig:
    encoder: str = "slim"
    share_encoder: bool = True
    slim_widths: tuple[int, ...] = (32, 64, 128, 256)
    decoder_channels: tuple[int, ...] = (512, 256, 128, 64)
    pretrained: bool = False

    def __post_init__(self):
        if self.encoder not in ("slim", "vgg16"):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if len(self.slim_widths) != 4:
            raise ValueError("slim encoder needs four stage widths (output stride 16)")
        if len(self.decoder_channels) != 4:
            raise ValueError("decoder needs four stages to undo stride 16")


def _slim_encoder(widths) -> nn.Sequential:
    layers, in_ch = [], 3
    for w in widths:
        layers += [nn.Conv2d(in_ch, w, 3, padding=1), nn.ReLU(inplace=True), nn.MaxPool2d(2)]
        in_ch = w
    layers += [nn.Conv2d(in_ch, ATTENTION_FEATURE_CHANNELS, 3, padding=1), nn.ReLU(inplace=True)]
    return nn.Sequential(*layers)


def _vgg16_encoder(pretrained: bool) -> nn.Sequential:
    import torchvision

    weights = None
    if pretrained:
        weights = torchvision.models.VGG16_Weights.IMAGENET1K_V1
    try:
        vgg = torchvision.models.vgg16(weights=weights)
    except Exception as exc:  # weights download unavailable
        log.warning("VGG16 weights unavailable (%s); using random initialisation", exc)
        vgg = torchvision.models.vgg16(weights=None)
    # through pool4: output stride 16, 512 channels
    return vgg.features[:24]


def _encoder(cfg: AttentionNetConfig) -> nn.Module:
    if cfg.encoder == "vgg16":
        return _vgg16_encoder(cfg.pretrained)
    return _slim_encoder(cfg.slim_widths)


def _decoder(channels) -> nn.Sequential:
    layers = [nn.Conv2d(ATTENTION_INPUTS * ATTENTION_FEATURE_CHANNELS, channels[0], 3, padding=1),
              nn.ReLU(inplace=True)]
    for c_in, c_out in zip(channels, channels[1:]):
        layers += [nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
                   nn.Conv2d(c_in, c_out, 3, padding=1), nn.ReLU(inplace=True)]
    layers += [nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
               nn.Conv2d(channels[-1], 1, 3, padding=1)]
    return nn.Sequential(*layers)


class AttentionNet(nn.Module):

    def __init__(self, cfg: AttentionNetConfig = AttentionNetConfig()):
        super().__init__()
        self.cfg = cfg
        n_encoders = 1 if cfg.share_encoder else ATTENTION_INPUTS
        self.encoders = nn.ModuleList(_encoder(cfg) for _ in range(n_encoders))
        self.decoder = _decoder(cfg.decoder_channels)

    def encode(self, x: torch.Tensor, index: int = 0) -> torch.Tensor:
        _check_input(x)
        enc = self.encoders[index if len(self.encoders) > 1 else 0]
        feats = enc(x)
        expected = (ATTENTION_FEATURE_CHANNELS, *ATTENTION_FEATURE_SIZE)
        assert tuple(feats.shape[1:]) == expected, f"encoder output {tuple(feats.shape)}"
        return feats

    def forward(self, rgb_frame, thermal_frame, rgb_template, thermal_template,
                return_intermediates: bool = False):
        """Attention map in [0, 1], ``N x 1 x 192 x 256``."""
        logits, feats, fused = self.logits(rgb_frame, thermal_frame, rgb_template,
                                           thermal_template, return_intermediates=True)
        out = torch.sigmoid(logits)
        if return_intermediates:
            return out, feats, fused
        return out

    def logits(self, rgb_frame, thermal_frame, rgb_template, thermal_template,
               return_intermediates: bool = False):
        """Pre-sigmoid map; training uses this for a numerically stable loss."""
        inputs = (rgb_frame, thermal_frame, rgb_template, thermal_template)
        n = rgb_frame.shape[0]
        if any(x.shape[0] != n for x in inputs):
            raise ShapeMismatchError("all four inputs need the same batch size")
        feats = [self.encode(x, i) for i, x in enumerate(inputs)]
        fused = torch.cat(feats, dim=1)
        assert tuple(fused.shape[1:]) == (ATTENTION_INPUTS * ATTENTION_FEATURE_CHANNELS,
                                          *ATTENTION_FEATURE_SIZE)
        out = self.decoder(fused)
        assert tuple(out.shape[1:]) == (1, *ATTENTION_INPUT_SIZE)
        if return_intermediates:
            return out, feats, fused
        return out


def _check_input(x: torch.Tensor):
    if x.dim() != 4 or tuple(x.shape[1:]) != (3, *ATTENTION_INPUT_SIZE):
        raise ShapeMismatchError(
            f"attention input must be N x 3 x {ATTENTION_INPUT_SIZE[0]} x {ATTENTION_INPUT_SIZE[1]},"
            f" got {tuple(x.shape)}")


def build_attention_net(cfg: AttentionNetConfig = AttentionNetConfig(), seed: int = 0) -> AttentionNet:
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = AttentionNet(cfg)
    return net.eval()


def prepare_frame(image: np.ndarray) -> torch.Tensor:
    """Resize a whole frame to 192x256 (no aspect preservation); ``3 x H x W``."""
    height, width = image.shape[:2]
    box = np.array([[0.0, 0.0, width, height]])
    return crop_patches(image, box, ATTENTION_INPUT_SIZE)[0]


def prepare_template(image: np.ndarray, box) -> torch.Tensor:
    """Letterbox the target region into 192x256, padding with the input mid-grey."""
    out_h, out_w = ATTENTION_INPUT_SIZE
    scale = min(out_h / box.h, out_w / box.w)
    ph = min(out_h, max(1, int(round(box.h * scale))))
    pw = min(out_w, max(1, int(round(box.w * scale))))
    patch = crop_patches(image, [box], (ph, pw))[0]
    canvas = torch.full((3, out_h, out_w), float(normalize_pixels(128.0)))
    top, left = (out_h - ph) // 2, (out_w - pw) // 2
    canvas[:, top:top + ph, left:left + pw] = patch
    return canvas


def _batched(x: torch.Tensor) -> torch.Tensor:
    return x.unsqueeze(0) if x.dim() == 3 else x


@torch.no_grad()
def estimate_attention(net: AttentionNet, rgb_frame, thermal_frame, rgb_template,
                       thermal_template) -> np.ndarray:
    """Attention map (192 x 256, values in [0, 1]) for one prepared input set."""
    net.eval()
    inputs = [_batched(torch.as_tensor(x)) for x in
              (rgb_frame, thermal_frame, rgb_template, thermal_template)]
    dtype = next(net.parameters()).dtype
    out = net(*[x.to(dtype) for x in inputs])
    if out.shape[0] != 1:
        return out[:, 0].numpy()
    return out[0, 0].numpy()
