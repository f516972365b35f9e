"""Accuracy metrics, range analysis, sweeps, and report writers."""

import csv
from dataclasses import replace

import numpy as np

from .dataset import subsample
from .errors import ConfigError
from .nn.net import build_drone_net
from .nn.train import topk_counts, train, validation_metrics


def predictions(logits):
    """Top-1 beam per row; ties resolve to the lower index."""
    return np.argmax(logits, axis=1)


def topk_accuracy(logits, labels, ks=(1, 2, 3)):
    labels = np.asarray(labels, np.int64)
    if len(labels) == 0:
        raise ValueError("no samples to score")
    counts = topk_counts(logits, labels, ks)
    return {k: counts[k] / len(labels) for k in ks}


def confusion_matrix(labels, preds, num_classes):
    labels = np.asarray(labels, np.int64)
    preds = np.asarray(preds, np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= num_classes \
            or preds.min(initial=0) < 0 or preds.max(initial=0) >= num_classes:
        raise ValueError("labels/predictions outside [0, num_classes)")
    flat = np.bincount(labels * num_classes + preds,
                       minlength=num_classes * num_classes)
    return flat.reshape(num_classes, num_classes)


def error_locality(labels, preds, window=3):
    """Among misclassified samples, the fraction within `window` beams.

    None when there are no errors at all.
    """
    labels = np.asarray(labels, np.int64)
    preds = np.asarray(preds, np.int64)
    wrong = preds != labels
    if not wrong.any():
        return None
    off = np.abs(preds[wrong] - labels[wrong])
    return float((off <= window).mean())


def link_distances(ds, indices=None):
    """Drone-to-serving-basestation distance per sample."""
    if indices is None:
        indices = np.arange(len(ds))
    stations = {int(k): np.asarray(v, float)
                for k, v in ds.manifest["basestations"].items()}
    pos = ds.positions[indices]
    bs_pos = np.stack([stations[int(b)] for b in ds.bs_ids[indices]])
    return np.linalg.norm(pos - bs_pos, axis=1)


def _auto_ranges(distances, num_ranges):
    lo, hi = float(distances.min()), float(distances.max())
    if lo == hi:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, num_ranges + 1)
    return [(float(edges[i]), float(edges[i + 1])) for i in range(num_ranges)]


def range_accuracy(distances, correct, ranges=None, num_ranges=4):
    """Top-1 accuracy binned by link distance.

    Bins are [lo, hi), with the overall maximum folded into the last bin.
    A bin holding no samples reports accuracy None rather than a number.
    """
    distances = np.asarray(distances, float)
    correct = np.asarray(correct, bool)
    if len(distances) != len(correct):
        raise ValueError("distances and correctness flags disagree in length")
    if ranges is None:
        if len(distances) == 0:
            raise ConfigError("cannot derive ranges from no samples")
        ranges = _auto_ranges(distances, num_ranges)
    else:
        ranges = [(float(lo), float(hi)) for lo, hi in ranges]
        if not ranges:
            raise ConfigError("empty range list")
        for lo, hi in ranges:
            if not lo < hi:
                raise ConfigError(f"bad range ({lo}, {hi})")
        ordered = sorted(ranges)
        for (alo, ahi), (blo, bhi) in zip(ordered, ordered[1:]):
            if ahi > blo:
                raise ConfigError(
                    f"ranges ({alo}, {ahi}) and ({blo}, {bhi}) overlap")
    top = max(hi for _lo, hi in ranges)
    out = []
    for lo, hi in ranges:
        mask = (distances >= lo) & (distances < hi)
        if hi == top:
            mask |= distances == hi
        n = int(mask.sum())
        acc = float(correct[mask].mean()) if n else None
        out.append({"lo": lo, "hi": hi, "count": n, "accuracy": acc})
    return out


def collect_logits(net, ds, indices, batch=256):
    chunks = []
    for start in range(0, len(indices), batch):
        bidx = indices[start:start + batch]
        x = ds.images(bidx).transpose(0, 3, 1, 2)
        chunks.append(net.forward(x))
    return np.concatenate(chunks, axis=0)


def evaluate_model(net, ds, indices, ks=(1, 2, 3), ranges=None, num_ranges=4,
                   locality_window=3, batch=256):
    """Full metric report over one sample selection."""
    indices = np.asarray(indices)
    if len(indices) == 0:
        raise ValueError("no samples selected for evaluation")
    logits = collect_logits(net, ds, indices, batch)
    labels = ds.labels[indices].astype(np.int64)
    preds = predictions(logits)
    num_beams = logits.shape[1]
    report = {
        "count": int(len(indices)),
        "num_beams": int(num_beams),
        "topk": topk_accuracy(logits, labels, ks),
        "locality_window": int(locality_window),
        "locality": error_locality(labels, preds, locality_window),
        "confusion": confusion_matrix(labels, preds, num_beams),
        "ranges": range_accuracy(link_distances(ds, indices), preds == labels,
                                 ranges, num_ranges),
    }
    return report


def data_fraction_sweep(ds, train_idx, val_idx, fractions, cfg, num_beams,
                        net_seed=0, dtype=np.float64):
    """Retrain from scratch on shrinking train subsets; score on val.

    Every fraction starts from the same initialization seed, and every run
    gets the same optimization budget: epochs and decay boundaries stretch
    by 1/fraction so the gradient step count and the rate-versus-step
    schedule stay fixed while only the data shrinks. Validation thins out
    by the same factor to keep its overhead flat.
    """
    if not fractions:
        raise ValueError("no fractions given")
    H, W, C = ds.image_shape
    rows = []
    for frac in fractions:
        sub = subsample(train_idx, frac, seed=cfg.seed)
        scale = 1.0 / float(frac)
        run_cfg = replace(
            cfg,
            epochs=max(1, int(round(cfg.epochs * scale))),
            decay_epochs=tuple(max(1, int(round(e * scale)))
                               for e in cfg.decay_epochs),
            val_every=max(1, int(round(scale))))
        net = build_drone_net(num_beams, (C, H, W), seed=net_seed, dtype=dtype)
        train(net, ds, sub, val_idx, run_cfg)
        acc = validation_metrics(net, ds, val_idx)
        rows.append({"fraction": float(frac), "num_train": int(len(sub)),
                     "top1": acc[1], "top2": acc[2], "top3": acc[3]})
    return rows


def write_topk_csv(path, topk):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", "accuracy"])
        for k in sorted(topk):
            w.writerow([k, f"{topk[k]:.6f}"])


def write_confusion_csv(path, matrix):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["true\\pred"] + list(range(matrix.shape[1])))
        for i, row in enumerate(matrix):
            w.writerow([i] + [int(v) for v in row])


def write_ranges_csv(path, ranges):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lo_m", "hi_m", "count", "top1"])
        for r in ranges:
            acc = "" if r["accuracy"] is None else f"{r['accuracy']:.6f}"
            w.writerow([f"{r['lo']:.3f}", f"{r['hi']:.3f}", r["count"], acc])


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["fraction", "num_train", "top1", "top2", "top3"])
        for r in rows:
            w.writerow([r["fraction"], r["num_train"], f"{r['top1']:.6f}",
                        f"{r['top2']:.6f}", f"{r['top3']:.6f}"])


def write_pruning_csv(path, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["model", "params", "flops", "top1",
                    "ms_per_image_b1", "ms_per_image_b10"])
        for r in rows:
            w.writerow([r["model"], r["params"], r["flops"],
                        f"{r['top1']:.6f}", f"{r['ms_per_image_b1']:.4f}",
                        f"{r['ms_per_image_b10']:.4f}"])


def write_history_csv(path, history):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "lr", "train_loss", "val_top1", "val_top2",
                    "val_top3"])
        for row in history:
            vals = [row["epoch"], f"{row['lr']:.3e}",
                    f"{row['train_loss']:.6f}"]
            for key in ("val_top1", "val_top2", "val_top3"):
                vals.append("" if row[key] is None else f"{row[key]:.6f}")
            w.writerow(vals)
