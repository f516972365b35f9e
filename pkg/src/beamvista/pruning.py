"""Structured filter pruning by per-filter l1 norm.

Removing a conv filter shrinks its output channel set, so every consumer of
that tensor gets the matching input slice. A residual block passes a slice
through: its hidden conv takes the slice on input and its second conv drops
the same output rows, keeping the identity skip aligned; the block's second
conv can therefore never be pruned directly.
"""

import math
import time

import numpy as np

from .nn.io import clone_network
from .nn.layers import (Conv2d, FullyConnected, GlobalAvgPool, MaxPool2d,
                        ReLU, ResidualBlock)
from .nn.net import count_flops, count_params
from .nn.train import TrainConfig, train


def filter_scores(conv):
    """Per-filter l1 norm of the kernel weights; bias plays no part."""
    return np.abs(conv.w).sum(axis=(1, 2, 3))


def keep_filters(scores, ratio):
    """Surviving filter indices, ascending.

    floor(ratio * F) filters are removed, weakest l1 norm first; on equal
    scores the lower index goes first.
    """
    F = len(scores)
    n_prune = math.floor(ratio * F)
    order = np.argsort(scores, kind="stable")
    dropped = set(int(i) for i in order[:n_prune])
    return np.array([i for i in range(F) if i not in dropped], dtype=np.int64)


def prunable_layers(net):
    """(name, conv) pairs whose output width may shrink.

    Top-level convolutions and each residual block's hidden conv qualify;
    block-final convs are pinned by the skip connection.
    """
    out = []
    for i, layer in enumerate(net.layers):
        if isinstance(layer, Conv2d):
            out.append((f"layer{i}", layer))
        elif isinstance(layer, ResidualBlock):
            out.append((f"layer{i}.conv1", layer.conv1))
    return out


def _input_shapes(net):
    shapes = []
    shape = net.input_shape
    for layer in net.layers:
        shapes.append(tuple(shape))
        shape = layer.out_shape(shape)
    return shapes


def _repair_consumers(net, start, keep, shapes):
    """Slice every consumer of layer `start`'s output down to `keep`."""
    j = start + 1
    while j < len(net.layers):
        layer = net.layers[j]
        if isinstance(layer, (ReLU, MaxPool2d, GlobalAvgPool)):
            j += 1
        elif isinstance(layer, Conv2d):
            layer.w = layer.w[:, keep].copy()
            return
        elif isinstance(layer, ResidualBlock):
            layer.conv1.w = layer.conv1.w[:, keep].copy()
            layer.conv2.w = layer.conv2.w[keep].copy()
            layer.conv2.b = layer.conv2.b[keep].copy()
            j += 1
        elif isinstance(layer, FullyConnected):
            out = layer.out_features
            w4 = layer.w.reshape((out,) + shapes[j])
            layer.w = w4[:, keep].reshape(out, -1).copy()
            return
        else:
            raise TypeError(f"cannot repair {type(layer).__name__}")
    raise ValueError("pruning the final layer would change the output size")


def prune(net, ratio, layers=None):
    """Pruned copy of the network; the input net is untouched.

    ratio in [0, 1) removes floor(ratio * F) filters from every prunable
    conv (or only those named in `layers`). Scores come from the weights as
    they are now, before any slicing.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must lie in [0, 1)")
    pruned = clone_network(net)
    candidates = dict(prunable_layers(pruned))
    if layers is not None:
        unknown = [n for n in layers if n not in candidates]
        if unknown:
            raise ValueError(
                f"not prunable: {unknown}; block-final convs are pinned by "
                f"the identity skip and only {sorted(candidates)} qualify")
        candidates = {n: candidates[n] for n in layers}

    keeps = {name: keep_filters(filter_scores(conv), ratio)
             for name, conv in candidates.items()}

    for name, keep in keeps.items():
        idx = int(name.split(".")[0][len("layer"):])
        layer = pruned.layers[idx]
        if isinstance(layer, ResidualBlock):
            layer.conv1.w = layer.conv1.w[keep].copy()
            layer.conv1.b = layer.conv1.b[keep].copy()
            layer.conv2.w = layer.conv2.w[:, keep].copy()
        else:
            shapes = _input_shapes(pruned)
            layer.w = layer.w[keep].copy()
            layer.b = layer.b[keep].copy()
            _repair_consumers(pruned, idx, keep, shapes)
    return pruned


def finetune(net, ds, train_idx, val_idx, epochs=10, learning_rate=1e-4,
             weight_decay=1e-4, batch_size=128, seed=0):
    """Short recovery training; the rate drops 10x over the last fifth."""
    decay = (max(1, int(round(0.8 * epochs))),) if epochs > 1 else ()
    cfg = TrainConfig(epochs=epochs, batch_size=batch_size,
                      learning_rate=learning_rate, weight_decay=weight_decay,
                      decay_epochs=decay, decay_factor=0.1, seed=seed)
    return train(net, ds, train_idx, val_idx, cfg)


def benchmark_latency(net, batch_sizes=(1, 10), trials=50, seed=0):
    """Median forward latency per image at each batch size.

    Timings are wall clock over full forward passes on one fixed random
    batch; 5 untimed warmup passes absorb lazy compilation.
    """
    if trials < 30:
        raise ValueError("need at least 30 trials for a stable median")
    rng = np.random.default_rng(seed)
    batches = {}
    for B in batch_sizes:
        if B < 1:
            raise ValueError("batch sizes must be positive")
        x = rng.random((int(B),) + tuple(net.input_shape))
        for _ in range(5):
            net.forward(x)
        times = []
        for _ in range(trials):
            t0 = time.perf_counter()
            net.forward(x)
            times.append(time.perf_counter() - t0)
        med = float(np.median(times))
        batches[int(B)] = {"total_ms": med * 1e3,
                           "ms_per_image": med * 1e3 / B}
    return {"batches": batches, "flops": count_flops(net),
            "params": count_params(net), "trials": int(trials)}
