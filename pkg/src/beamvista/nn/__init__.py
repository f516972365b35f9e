"""From-scratch CNN: layers, network container, training, serialization."""

from .io import clone_network, load_model, save_model
from .layers import (Conv2d, FullyConnected, GlobalAvgPool, MaxPool2d, ReLU,
                     ResidualBlock)
from .net import Network, build_drone_net, count_flops, count_params
from .train import (AdamState, TrainConfig, adam_step, channel_stats,
                    cross_entropy, lr_at, topk_counts, train,
                    validation_metrics)

__all__ = [
    "AdamState", "Conv2d", "FullyConnected", "GlobalAvgPool", "MaxPool2d",
    "Network", "ReLU", "ResidualBlock", "TrainConfig", "adam_step",
    "build_drone_net", "channel_stats", "clone_network", "count_flops",
    "count_params",
    "cross_entropy", "load_model", "lr_at", "save_model", "topk_counts",
    "train", "validation_metrics",
]
