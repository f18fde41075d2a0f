"""Default constants and the flat run configuration.

Every published constant of the method lives here and nowhere else; the
other modules import these names for their default arguments.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

# Optimizer settings.
LEARNING_RATE = 5e-5
BATCH_SIZE = 20
EPOCHS = 50

# Global proposal filter.
MAX_CENTER_DISTANCE = 25.0
MIN_OVERLAP = 0.3

# Evaluation thresholds.
PRECISION_THRESHOLD_PX = 5.0
SUCCESS_THRESHOLD = 0.6

# First-frame sample labelling by IoU with the ground truth.
POS_IOU_MIN = 0.7
POS_IOU_MAX = 1.0
NEG_IOU_MAX = 0.5

# Global attention network geometry (height, width).
ATTENTION_INPUT_SIZE = (192, 256)
ATTENTION_FEATURE_SIZE = (12, 16)
ATTENTION_FEATURE_CHANNELS = 512
ATTENTION_INPUTS = 4

# Denominator guard for the attention regularizers.
EPSILON = 1e-7

# Reported reference values: lambda -> (PR, SR) on GTOT-50, in percent.
REFERENCE_LAMBDA_TABLE = {
    1: (84.3, 67.4),
    2: (84.9, 67.4),
    3: (84.3, 67.7),
    4: (84.8, 67.4),
    5: (83.5, 66.9),
    6: (84.1, 67.5),
    7: (83.8, 67.1),
    8: (84.6, 66.9),
    9: (84.7, 67.7),
}
# Reported headline results: dataset -> {metric: value}.
REFERENCE_HEADLINE = {
    "RGBT-234": {"PR": 0.787, "SR": 0.545},
    "GTOT-50": {"SR": 0.677},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    # ablation switches
    use_local_attention: bool = True
    use_global_attention: bool = True
    lam: float = 1.0
    epsilon: float = EPSILON

    # optimizer
    learning_rate: float = LEARNING_RATE
    attention_learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS

    # first-frame training
    init_iterations: int = 50
    init_pos: int = 500
    init_neg: int = 5000
    pos_fraction: float = 0.25
    hard_negative_pool: int = 0

    # online update
    update_iterations: int = 15
    long_term_interval: int = 10
    short_term_frames: int = 20
    pos_capacity: int = 100
    neg_capacity: int = 300
    update_pos: int = 50
    update_neg: int = 200
    confidence_threshold: float = 0.0

    # bounding-box regression
    bbox_reg_samples: int = 1000
    bbox_reg_alpha: float = 1000.0
    bbox_reg_min_iou: float = 0.6

    # classifier network
    patch_size: int = 107
    padding: float = 0.2
    conv_channels: tuple[int, ...] = (96, 256, 512)
    fc_dim: int = 512
    activation: str = "relu"
    lrn: bool = True
    share_streams: bool = False

    # local proposals
    n_proposals: int = 256
    translation_sigma: float = 0.6
    scale_sigma: float = 0.05
    scale_min: float = 0.7
    scale_max: float = 1.4

    # global attention
    attention_encoder: str = "slim"
    share_encoder: bool = True
    attention_widths: tuple[int, ...] = (32, 64, 128, 256)
    attention_decoder: tuple[int, ...] = (512, 256, 128, 64)
    attention_threshold: float = 0.5
    attention_floor: float = 0.1
    global_k: int = 5
    global_every_frame: bool = True
    max_center_distance: float = MAX_CENTER_DISTANCE
    min_overlap: float = MIN_OVERLAP
    mask_polarity: str = "target_high"

    # evaluation
    precision_threshold: float = PRECISION_THRESHOLD_PX
    success_threshold: float = SUCCESS_THRESHOLD
    include_first_frame: bool = True

    # data
    gtot_gt_source: str = "visible"
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be non-negative")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.mask_polarity not in ("target_high", "target_low"):
            raise ConfigError(f"unknown mask_polarity {self.mask_polarity!r}")
        if self.gtot_gt_source not in ("visible", "infrared"):
            raise ConfigError(f"unknown gtot_gt_source {self.gtot_gt_source!r}")

    @property
    def effective_lambda(self) -> float:
        return self.lam if self.use_local_attention else 0.0

    @property
    def variant(self) -> str:
        if self.effective_lambda == 0 and not self.use_global_attention:
            return "baseline"
        if not self.use_global_attention:
            return "local"
        if self.effective_lambda == 0:
            return "global"
        return "local+global"

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def desk_scale(cls, **overrides) -> "RunConfig":
        """Slim network and short schedules that run in seconds on one CPU core."""
        values = dict(
            conv_channels=(16, 32, 64),
            fc_dim=128,
            lrn=False,
            learning_rate=2e-3,
            attention_learning_rate=1e-2,
            attention_widths=(16, 32, 64, 128),
            attention_decoder=(128, 64, 32, 16),
            init_iterations=60,
            init_pos=200,
            init_neg=1000,
            update_iterations=10,
            update_pos=30,
            update_neg=90,
            bbox_reg_samples=300,
            n_proposals=128,
            translation_sigma=0.3,
            epochs=10,
        )
        values.update(overrides)
        return cls(**values)

    # -- flat key/value text format -------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        hints = typing.get_type_hints(cls)
        values = {}
        for line_no, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "lambda":
                key = "lam"
            if key not in hints:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            try:
                values[key] = _parse_value(value, hints[key])
            except ValueError as exc:
                raise ConfigError(f"line {line_no}: bad value for {key}: {exc}") from None
        if base is not None:
            return dataclasses.replace(base, **values)
        return cls(**values)

    @classmethod
    def load(cls, path, base: "RunConfig | None" = None) -> "RunConfig":
        return cls.loads(Path(path).read_text(), base=base)

    def save(self, path):
        Path(path).write_text(self.dumps())

    # -- sub-configs for the library modules ----------------------------

    def proposal_config(self):
        from .geometry import ProposalSamplingConfig

        return ProposalSamplingConfig(
            count=self.n_proposals,
            translation_sigma=self.translation_sigma,
            scale_sigma=self.scale_sigma,
            scale_limits=(self.scale_min, self.scale_max),
        )

    def filter_config(self):
        from .global_attention.proposals import GlobalProposalFilter

        return GlobalProposalFilter(self.max_center_distance, self.min_overlap)

    def loss_config(self):
        from .local_attention.losses import LossConfig

        return LossConfig(lam=self.effective_lambda, epsilon=self.epsilon,
                          batch_size=self.batch_size)

    def network_config(self):
        from .local_attention.network import NetworkConfig

        return NetworkConfig(
            input_size=self.patch_size,
            conv_channels=tuple(self.conv_channels),
            fc_dim=self.fc_dim,
            activation=self.activation,
            lrn=self.lrn,
            share_streams=self.share_streams,
        )

    def attention_net_config(self):
        from .global_attention.network import AttentionNetConfig

        return AttentionNetConfig(encoder=self.attention_encoder,
                                  share_encoder=self.share_encoder,
                                  slim_widths=tuple(self.attention_widths),
                                  decoder_channels=tuple(self.attention_decoder))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse_value(text: str, kind):
    if kind is bool:
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    if typing.get_origin(kind) is tuple:
        (item_type, _ellipsis) = typing.get_args(kind)
        return tuple(item_type(t) for t in text.replace(" ", "").split(",") if t)
    raise ValueError(f"unsupported field type {kind}")
