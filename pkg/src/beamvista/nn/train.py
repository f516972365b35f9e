"""Adam training loop with step-decayed learning rate."""

from dataclasses import dataclass

import numpy as np

from ..errors import DataError, NumericError


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    decay_epochs: tuple = (10, 20)
    decay_factor: float = 0.1
    seed: int = 0
    # validation cadence in epochs; the final epoch always evaluates
    val_every: int = 1

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")
        if self.learning_rate <= 0 or self.decay_factor <= 0:
            raise ValueError("learning_rate and decay_factor must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.val_every < 1:
            raise ValueError("val_every must be at least 1")


def lr_at(epoch, cfg):
    """Step decay: multiply by decay_factor at each listed epoch."""
    hits = sum(1 for d in cfg.decay_epochs if epoch >= d)
    return cfg.learning_rate * cfg.decay_factor ** hits


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    B = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    idx = np.arange(B)
    logp = z[idx, labels] - np.log(s[:, 0])
    loss = float(-logp.mean())
    dlogits = e / s
    dlogits[idx, labels] -= 1.0
    dlogits /= B
    return loss, dlogits.astype(logits.dtype, copy=False)


class AdamState:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(params, grads, state, lr, weight_decay=0.0):
    """One in-place update; weight decay is folded into the gradient."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g is None or not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name}")
        if weight_decay:
            g = g + weight_decay * p
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def channel_stats(pixels, indices, chunk=512):
    """Per-channel mean/std of the selected frames, in [0, 1] units.

    Streamed in chunks so the uint8 store is never expanded to float at
    full size. Zero-variance channels get std 1 to keep normalization
    finite.
    """
    if len(indices) == 0:
        raise DataError("cannot take channel stats of an empty selection")
    C = pixels.shape[-1]
    s1 = np.zeros(C)
    s2 = np.zeros(C)
    count = 0
    for start in range(0, len(indices), chunk):
        block = pixels[indices[start:start + chunk]].astype(np.float64) / 255.0
        flat = block.reshape(-1, C)
        s1 += flat.sum(axis=0)
        s2 += (flat * flat).sum(axis=0)
        count += flat.shape[0]
    mean = s1 / count
    var = np.maximum(s2 / count - mean * mean, 0.0)
    std = np.sqrt(var)
    std[std == 0.0] = 1.0
    return mean, std


def _batch_images(ds, indices):
    return ds.images(indices).transpose(0, 3, 1, 2)


def topk_counts(logits, labels, ks):
    """How many rows have the label inside the best k logits, per k."""
    order = np.argsort(-logits, axis=1, kind="stable")
    out = {}
    for k in ks:
        out[k] = int((order[:, :k] == labels[:, None]).any(axis=1).sum())
    return out


def validation_metrics(net, ds, indices, ks=(1, 2, 3), batch=256):
    """Top-k accuracies over a sample selection, batched."""
    totals = {k: 0 for k in ks}
    for start in range(0, len(indices), batch):
        bidx = indices[start:start + batch]
        logits = net.forward(_batch_images(ds, bidx))
        counts = topk_counts(logits, ds.labels[bidx].astype(np.int64), ks)
        for k in ks:
            totals[k] += counts[k]
    n = max(len(indices), 1)
    return {k: totals[k] / n for k in ks}


def train(net, ds, train_idx, val_idx, cfg):
    """Train in place; finish holding the best-validation-top1 weights.

    Channel normalization statistics are taken from the train split and
    stored on the network before the first step. Returns one history row
    per epoch. Ties on validation top-1 keep the earlier snapshot.
    """
    train_idx = np.asarray(train_idx)
    val_idx = np.asarray(val_idx)
    if len(train_idx) == 0:
        raise DataError("train split is empty")

    mean, std = channel_stats(ds.pixels, train_idx)
    net.input_mean = mean
    net.input_std = std

    history = []
    if cfg.epochs == 0:
        return history

    params = net.parameters()
    state = AdamState(params)
    best = net.snapshot()
    best_top1 = -1.0

    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        perm = np.random.default_rng(
            np.random.SeedSequence([int(cfg.seed), epoch])).permutation(
                len(train_idx))
        order = train_idx[perm]
        loss_sum = 0.0
        seen = 0
        for start in range(0, len(order), cfg.batch_size):
            bidx = order[start:start + cfg.batch_size]
            x = _batch_images(ds, bidx)
            y = ds.labels[bidx].astype(np.int64)
            logits = net.forward(x)
            loss, dlogits = cross_entropy(logits, y)
            net.backward(dlogits)
            adam_step(params, net.gradients(), state, lr, cfg.weight_decay)
            loss_sum += loss * len(bidx)
            seen += len(bidx)

        row = {"epoch": epoch, "lr": lr, "train_loss": loss_sum / seen,
               "val_top1": None, "val_top2": None, "val_top3": None}
        due = (epoch + 1) % cfg.val_every == 0 or epoch == cfg.epochs - 1
        if len(val_idx) and due:
            acc = validation_metrics(net, ds, val_idx)
            row.update(val_top1=acc[1], val_top2=acc[2], val_top3=acc[3])
            if acc[1] > best_top1:
                best_top1 = acc[1]
                best = net.snapshot()
        history.append(row)

    if len(val_idx):
        net.restore(best)
    return history
