from .bbox_reg import BBoxRegressor, bbox_regress
from .losses import (AttentionMaps, LossConfig, classification_loss, compute_attention_maps,
                     forward_score, loss_terms, regularizer_negative, regularizer_positive,
                     total_loss)
from .network import NetworkConfig, TrackerNetwork, build_network
from .train import SampleStore, TrainResult, online_update, train_first_frame

__all__ = [
    "AttentionMaps", "BBoxRegressor", "LossConfig", "NetworkConfig", "SampleStore",
    "TrackerNetwork", "TrainResult", "bbox_regress", "build_network", "classification_loss",
    "compute_attention_maps", "forward_score", "loss_terms", "online_update",
    "regularizer_negative", "regularizer_positive", "total_loss", "train_first_frame",
]
