from .network import (AttentionNet, AttentionNetConfig, build_attention_net, estimate_attention,
                      prepare_frame, prepare_template)
from .proposals import GlobalProposalFilter, extract_global_proposals, filter_global_proposals
from .train import (AttentionSample, AttentionTrainConfig, attention_logit_loss, attention_training_loss,
                    build_attention_samples, mask_target, train_attention_net)

__all__ = [
    "AttentionNet", "AttentionNetConfig", "AttentionSample", "AttentionTrainConfig",
    "GlobalProposalFilter", "attention_logit_loss", "attention_training_loss", "build_attention_net",
    "build_attention_samples", "estimate_attention", "extract_global_proposals",
    "filter_global_proposals", "mask_target", "prepare_frame", "prepare_template",
    "train_attention_net",
]
