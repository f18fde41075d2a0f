"""Two-stream RGB-T tracking-by-detection classifier.

Each modality passes through three convolutional layers and two fully
connected layers; the two fc5 outputs are concatenated and scored by a
domain-specific head that emits ``(pos_score, neg_score)`` per sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ShapeMismatchError

_ACTIVATIONS = {
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
    "sigmoid": nn.Sigmoid,
    "softplus": nn.Softplus,
}


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int = 107
    conv_channels: tuple[int, ...] = (96, 256, 512)
    conv_kernels: tuple[int, ...] = (7, 5, 3)
    conv_strides: tuple[int, ...] = (2, 2, 1)
    conv_pools: tuple[bool, ...] = (True, True, False)
    fc_dim: int = 512
    activation: str = "relu"
    lrn: bool = True
    share_streams: bool = False
    n_domains: int = 1

    def __post_init__(self):
        n = len(self.conv_channels)
        if not (len(self.conv_kernels) == len(self.conv_strides) == len(self.conv_pools) == n):
            raise ValueError("conv layer settings must all have the same length")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {sorted(_ACTIVATIONS)}")

    @classmethod
    def tiny(cls, activation: str = "tanh") -> "NetworkConfig":
        """A smooth network with fewer than 1k parameters, for gradient checks."""
        return cls(input_size=9, conv_channels=(2, 2, 2), conv_kernels=(3, 3, 3),
                   conv_strides=(1, 1, 1), conv_pools=(False, False, False), fc_dim=6,
                   activation=activation, lrn=False)


def _conv_stack(cfg: NetworkConfig) -> tuple[nn.Sequential, int]:
    layers = []
    in_ch, size = 3, cfg.input_size
    for ch, k, s, pool in zip(cfg.conv_channels, cfg.conv_kernels, cfg.conv_strides,
                              cfg.conv_pools):
        layers += [nn.Conv2d(in_ch, ch, k, s), _ACTIVATIONS[cfg.activation]()]
        size = (size - k) // s + 1
        if pool:
            if cfg.lrn:
                layers.append(nn.LocalResponseNorm(5, alpha=1e-4, beta=0.75, k=2.0))
            layers.append(nn.MaxPool2d(3, 2))
            size = (size - 3) // 2 + 1
        in_ch = ch
    if size < 1:
        raise ValueError(f"input size {cfg.input_size} is too small for the conv layers")
    return nn.Sequential(*layers), in_ch * size * size


def _fc_stack(cfg: NetworkConfig, in_dim: int) -> nn.Sequential:
    act = _ACTIVATIONS[cfg.activation]
    return nn.Sequential(nn.Linear(in_dim, cfg.fc_dim), act(),
                         nn.Linear(cfg.fc_dim, cfg.fc_dim), act())


class TrackerNetwork(nn.Module):

    def __init__(self, cfg: NetworkConfig = NetworkConfig()):
        super().__init__()
        self.cfg = cfg
        self.rgb_conv, self.conv_dim = _conv_stack(cfg)
        self.rgb_fc = _fc_stack(cfg, self.conv_dim)
        if cfg.share_streams:
            self.thermal_conv, self.thermal_fc = self.rgb_conv, self.rgb_fc
        else:
            self.thermal_conv, _ = _conv_stack(cfg)
            self.thermal_fc = _fc_stack(cfg, self.conv_dim)
        self.heads = nn.ModuleList(nn.Linear(2 * cfg.fc_dim, 2) for _ in range(cfg.n_domains))

    @property
    def feature_dim(self) -> int:
        return 2 * self.conv_dim

    def _check(self, x: torch.Tensor, name: str):
        s = self.cfg.input_size
        if x.dim() != 4 or tuple(x.shape[1:]) != (3, s, s):
            raise ShapeMismatchError(f"{name} batch must be N x 3 x {s} x {s}, got {tuple(x.shape)}")

    def features(self, rgb: torch.Tensor, thermal: torch.Tensor) -> torch.Tensor:
        """Flattened conv features of both streams, concatenated (RGB first)."""
        self._check(rgb, "rgb")
        self._check(thermal, "thermal")
        if rgb.shape[0] != thermal.shape[0]:
            raise ShapeMismatchError("rgb and thermal batches differ in length")
        f_rgb = self.rgb_conv(rgb).flatten(1)
        f_th = self.thermal_conv(thermal).flatten(1)
        return torch.cat([f_rgb, f_th], dim=1)

    def head(self, features: torch.Tensor, domain: int = 0) -> torch.Tensor:
        f_rgb, f_th = features.split(self.conv_dim, dim=1)
        fused = torch.cat([self.rgb_fc(f_rgb), self.thermal_fc(f_th)], dim=1)
        return self.heads[domain](fused)

    def forward(self, rgb: torch.Tensor, thermal: torch.Tensor, domain: int = 0) -> torch.Tensor:
        return self.head(self.features(rgb, thermal), domain)

    def conv_parameters(self):
        params = list(self.rgb_conv.parameters())
        if not self.cfg.share_streams:
            params += list(self.thermal_conv.parameters())
        return params

    def fc_parameters(self):
        params = list(self.rgb_fc.parameters())
        if not self.cfg.share_streams:
            params += list(self.thermal_fc.parameters())
        return params + list(self.heads.parameters())


def build_network(cfg: NetworkConfig = NetworkConfig(), seed: int = 0,
                  dtype: torch.dtype = torch.float32) -> TrackerNetwork:
    """Randomly initialised network (PyTorch default layer init under ``seed``)."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        net = TrackerNetwork(cfg)
    return net.to(dtype).eval()
