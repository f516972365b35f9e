"""Command-line entry points.

Exit codes: 0 success, 2 configuration or argument problem, 3 data problem
(missing/corrupt/incompatible), 4 numerical failure, 5 I/O failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import backend
from .config import (load_config, make_cameras, make_link, make_train_config,
                     make_world_config, train_dtype)
from .dataset import (Dataset, build_dataset, filter_scenario, split_by_trajectory,
                      split_dataset, subsample)
from .errors import ConfigError, DataError, NumericError
from .evaluation import (data_fraction_sweep, evaluate_model, write_confusion_csv,
                         write_history_csv, write_pruning_csv, write_ranges_csv,
                         write_sweep_csv, write_topk_csv)
from .nn.io import load_model, save_model
from .nn.net import build_drone_net, count_flops, count_params
from .nn.train import train, validation_metrics
from .pruning import benchmark_latency, finetune, prune
from .scene import generate_trajectories, generate_world

_STAGE_TAGS = {"world": 1, "trajectories": 2, "samples": 3, "split": 4,
               "train": 5, "sweep": 6, "bench": 7}


def stage_seed(base, stage):
    """Distinct per-stage seed derived from one base seed."""
    ss = np.random.SeedSequence([int(base), _STAGE_TAGS[stage]])
    return int(ss.generate_state(1)[0])


class _Seeds:
    """Stage seeds: config values, or all derived from --seed when given."""

    def __init__(self, cfg, base):
        self._cfg = cfg
        self._base = base

    def get(self, stage):
        if self._base is not None:
            return stage_seed(self._base, stage)
        return {
            "world": self._cfg.world.seed,
            "trajectories": self._cfg.trajectories.seed,
            "samples": self._cfg.dataset.seed,
            "split": self._cfg.dataset.split_seed,
            "train": self._cfg.train.seed,
            "sweep": self._cfg.train.seed,
            "bench": 0,
        }[stage]


def _setup(args):
    cfg = load_config(args.config)
    if args.deterministic:
        if args.seed is None:
            raise ConfigError("--deterministic requires --seed")
        backend.set_thread_cap(1)
    return cfg, _Seeds(cfg, args.seed)


def _split(cfg, ds, seeds):
    ratio = cfg.dataset.split_ratio
    seed = seeds.get("split")
    if cfg.dataset.per_trajectory_split:
        return split_by_trajectory(ds, ratio, seed)
    return split_dataset(len(ds), ratio, seed)


def _load_dataset(path):
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    return Dataset.load(path)


def _load_model(path):
    if not os.path.exists(path):
        raise DataError(f"model file not found: {path}")
    return load_model(path)


def cmd_generate(args):
    cfg, seeds = _setup(args)
    world = generate_world(make_world_config(cfg), seeds.get("world"))
    t = cfg.trajectories
    trajectories = generate_trajectories(
        t.count, seed=seeds.get("trajectories"), total_samples=t.total_samples,
        x_range=tuple(cfg.world.street_x), y_range=(t.y_min, t.y_max))
    ds = build_dataset(world, trajectories, make_link(cfg), make_cameras(cfg),
                       seeds.get("samples"),
                       marker_min_px=cfg.render.marker_min_px)
    ds.save(args.out)
    m = ds.manifest
    print(f"wrote {args.out}: {m['num_samples']} samples "
          f"({m['num_discarded']} discarded), {m['width']}x{m['height']} frames, "
          f"{m['num_beams']} beams")
    print(f"content hash {m['content_hash']}")
    return 0


def cmd_train(args):
    cfg, seeds = _setup(args)
    ds = _load_dataset(args.data)
    train_idx, val_idx = _split(cfg, ds, seeds)
    if args.fraction is not None:
        train_idx = subsample(train_idx, args.fraction, seeds.get("split"))
    h, w, c = ds.image_shape
    net = build_drone_net(ds.manifest["num_beams"], (c, h, w),
                          seed=seeds.get("train"), dtype=train_dtype(cfg))
    tcfg = make_train_config(cfg, seed=seeds.get("train"))
    history = train(net, ds, train_idx, val_idx, tcfg)
    save_model(net, args.out)
    write_history_csv(os.path.splitext(args.out)[0] + ".history.csv", history)
    acc = validation_metrics(net, ds, val_idx)
    print(f"trained on {len(train_idx)} samples for {tcfg.epochs} epochs")
    print(f"val top-1 {acc[1]:.4f}  top-2 {acc[2]:.4f}  top-3 {acc[3]:.4f}")
    print(f"wrote {args.out}")
    return 0


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def cmd_eval(args):
    cfg, seeds = _setup(args)
    ds = _load_dataset(args.data)
    net = _load_model(args.model)
    train_idx, val_idx = _split(cfg, ds, seeds)
    base_idx = {"val": val_idx, "train": train_idx,
                "all": np.arange(len(ds))}[args.split]
    e = cfg.eval
    report = evaluate_model(net, ds, base_idx, ks=tuple(e.topk),
                            num_ranges=e.num_ranges,
                            locality_window=e.locality_window)
    report["split"] = args.split
    report["scenarios"] = {}
    for scenario in ("combined", "bs1", "bs2"):
        idx = np.intersect1d(base_idx, filter_scenario(ds, scenario))
        if len(idx) == 0:
            continue
        sub = evaluate_model(net, ds, idx, ks=tuple(e.topk),
                             num_ranges=e.num_ranges,
                             locality_window=e.locality_window)
        report["scenarios"][scenario] = {
            "count": sub["count"], "topk": sub["topk"],
            "locality": sub["locality"]}

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "report.json"), "w") as f:
        json.dump(_jsonable(report), f, indent=2, sort_keys=True)
        f.write("\n")
    write_topk_csv(os.path.join(args.out_dir, "topk.csv"), report["topk"])
    write_confusion_csv(os.path.join(args.out_dir, "confusion.csv"),
                        report["confusion"])
    write_ranges_csv(os.path.join(args.out_dir, "ranges.csv"),
                     report["ranges"])
    for k in sorted(report["topk"]):
        print(f"top-{k} accuracy {report['topk'][k]:.4f}")
    loc = report["locality"]
    print("errors within window: "
          + ("n/a (no errors)" if loc is None else f"{loc:.4f}"))
    print(f"wrote report to {args.out_dir}")
    return 0


def cmd_prune(args):
    cfg, seeds = _setup(args)
    ds = _load_dataset(args.data)
    baseline = _load_model(args.model)
    train_idx, val_idx = _split(cfg, ds, seeds)
    ratio = cfg.prune.ratio if args.ratio is None else args.ratio
    ft_epochs = (cfg.prune.finetune_epochs if args.finetune_epochs is None
                 else args.finetune_epochs)

    pruned = prune(baseline, ratio)
    if ft_epochs > 0:
        finetune(pruned, ds, train_idx, val_idx, epochs=ft_epochs,
                 learning_rate=cfg.prune.finetune_lr,
                 batch_size=cfg.train.batch_size, seed=seeds.get("train"))
    save_model(pruned, args.out)

    trials = cfg.bench.trials
    rows = []
    for name, net in (("baseline", baseline), ("pruned", pruned)):
        acc = validation_metrics(net, ds, val_idx)
        lat = benchmark_latency(net, batch_sizes=(1, 10), trials=trials,
                                seed=seeds.get("bench"))
        rows.append({
            "model": name, "params": lat["params"], "flops": lat["flops"],
            "top1": acc[1],
            "ms_per_image_b1": lat["batches"][1]["ms_per_image"],
            "ms_per_image_b10": lat["batches"][10]["ms_per_image"],
        })
    write_pruning_csv(os.path.splitext(args.out)[0] + ".pruning.csv", rows)
    for r in rows:
        print(f"{r['model']:>8}: {r['params']} params, {r['flops']} flops, "
              f"top-1 {r['top1']:.4f}, "
              f"{r['ms_per_image_b1']:.3f} ms/img (b1), "
              f"{r['ms_per_image_b10']:.3f} ms/img (b10)")
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args):
    cfg, seeds = _setup(args)
    net = _load_model(args.model)
    trials = cfg.bench.trials if args.trials is None else args.trials
    result = benchmark_latency(net, batch_sizes=tuple(cfg.bench.batch_sizes),
                               trials=trials, seed=seeds.get("bench"))
    result["backend"] = backend.active_backend()
    out = _jsonable(result)
    if args.out:
        with open(args.out, "w") as f:
            json.dump(out, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"wrote {args.out}")
    print(f"backend: {result['backend']}")
    print(f"params {result['params']}, flops {result['flops']}")
    for b, r in result["batches"].items():
        print(f"batch {b}: {r['ms_per_image']:.3f} ms/image "
              f"({r['total_ms']:.3f} ms total, median of {trials})")
    return 0


def cmd_sweep(args):
    cfg, seeds = _setup(args)
    ds = _load_dataset(args.data)
    train_idx, val_idx = _split(cfg, ds, seeds)
    fractions = args.fractions or list(cfg.eval.fractions)
    tcfg = make_train_config(cfg, seed=seeds.get("train"))
    rows = data_fraction_sweep(ds, train_idx, val_idx, fractions, tcfg,
                               ds.manifest["num_beams"],
                               net_seed=seeds.get("sweep"),
                               dtype=train_dtype(cfg))
    write_sweep_csv(args.out, rows)
    for r in rows:
        print(f"fraction {r['fraction']:.2f} ({r['num_train']} samples): "
              f"top-1 {r['top1']:.4f}  top-3 {r['top3']:.4f}")
    print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="beamvista",
        description="Simulate a drone beam-selection link, generate "
                    "image/beam data, train and prune the predictor.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML file overlaying the defaults")
        p.add_argument("--seed", type=int,
                       help="base seed; overrides every configured seed")
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded kernels; requires --seed")

    p = sub.add_parser("generate", help="build and save a dataset")
    common(p)
    p.add_argument("--out", required=True, help="output dataset path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the beam predictor")
    common(p)
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--fraction", type=float,
                   help="train on this fraction of the train split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a dataset")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True, help="report directory")
    p.add_argument("--split", choices=("val", "train", "all"), default="val")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prune", help="prune a model and fine-tune it")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output pruned model path")
    p.add_argument("--ratio", type=float, help="fraction of filters to drop")
    p.add_argument("--finetune-epochs", type=int)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("bench", help="measure model latency")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="write results as JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="accuracy vs training-data fraction")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--fractions", type=float, nargs="+")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
