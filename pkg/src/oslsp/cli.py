"""Experiment command line.

Subcommands:

* ``gen-data``     — write a synthetic dataset and its proportion table.
* ``train``        — two-stage training; writes checkpoints, a loss log,
                     and a manifest sufficient to reproduce the run.
* ``eval``         — score a checkpoint on a labeled dataset; writes the
                     metrics table (accuracy, recall, precision, f1, rmse)
                     and the confusion matrix.
* ``inspect-hist`` — dump predicted vs target similarity histograms for
                     one bag pair, plus their KL value.

Everything is file-in/file-out; set ``OSLSP_LOG=DEBUG|INFO|...`` for
verbosity. All commands exit 0 only when their outputs were written.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bags as bags_mod
from . import synth
from .bags import DatasetFormatError, build_bags, load_dataset, load_proportion_table
from .losses import discretize_ground_truth, kl_divergence
from .metrics import evaluate
from .model import (ArchitectureConfig, CheckpointError, ModelParams,
                    backbone_forward, init_params, load_checkpoint,
                    predict_classes, save_checkpoint)
from .ordinal import ground_truth_pdf
from .simhist import gaussian_histogram, pairwise_scaled_cosine
from .train import (ConfigError, TrainConfig, TrainingError, config_to_text,
                    load_config, train_backbone, train_head)

log = logging.getLogger("oslsp")

_FAILURE_EXIT = 2


def _setup_logging() -> None:
    level = os.environ.get("OSLSP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_cfg(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "bins", None) is not None:
        overrides["bins"] = args.bins
    if getattr(args, "sigma", None) is not None:
        overrides["sigma"] = args.sigma
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = True
    if overrides:
        from dataclasses import replace
        cfg = replace(cfg, **overrides)
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _schedule_for(cfg: TrainConfig) -> synth.ProportionSchedule:
    if cfg.schedule_file:
        return synth.load_schedule(cfg.schedule_file)
    return synth.default_schedule(cfg.num_classes)


def _arch_for(cfg: TrainConfig) -> ArchitectureConfig:
    return ArchitectureConfig(input_dim=cfg.input_dim,
                              backbone_hidden=cfg.backbone_hidden,
                              feature_dim=cfg.feature_dim,
                              head_hidden=cfg.head_hidden,
                              num_classes=cfg.num_classes)


def _proportions_path(args) -> Path:
    if getattr(args, "proportions", None):
        return Path(args.proportions)
    return Path(args.data).parent / "proportions.csv"


# -- subcommands -----------------------------------------------------------------


def _cmd_gen_data(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    schedule = _schedule_for(cfg)
    manifold = synth.ManifoldConfig(input_dim=cfg.input_dim,
                                    num_classes=schedule.num_classes,
                                    radius=cfg.manifold_radius,
                                    arc_angle=cfg.manifold_arc,
                                    noise_scale=cfg.noise_scale,
                                    hard_mode=cfg.hard_mode,
                                    seed=cfg.seed)
    dataset, table = synth.generate(schedule, manifold, cfg.per_date_count, cfg.seed)
    bags_mod.save_dataset(out / "dataset.csv", dataset)
    bags_mod.save_proportion_table(out / "proportions.csv", table)

    classes = dataset.true_classes
    for di, date in enumerate(schedule.dates):
        lo, hi = di * cfg.per_date_count, (di + 1) * cfg.per_date_count
        empirical = np.bincount(classes[lo:hi] - 1, minlength=schedule.num_classes)
        empirical = empirical / empirical.sum()
        print(f"{date}: {cfg.per_date_count} instances, empirical proportions "
              + "[" + ", ".join(f"{v:.3f}" for v in empirical) + "]")
    print(f"wrote {out / 'dataset.csv'} and {out / 'proportions.csv'}")
    return 0


def _write_manifest(path: Path, cfg: TrainConfig, data_path: Path,
                    prop_path: Path, out: Path) -> None:
    lines = [
        "manifest_version=1",
        f"dataset={data_path}",
        f"dataset_sha256={_sha256(data_path)}",
        f"proportions={prop_path}",
        f"proportions_sha256={_sha256(prop_path)}",
        f"out_dir={out}",
        "[config]",
        config_to_text(cfg).rstrip("\n"),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data_path = Path(args.data)
    prop_path = _proportions_path(args)
    dataset = load_dataset(data_path)
    proportions = load_proportion_table(prop_path, dataset.num_classes)
    bag_list = build_bags(dataset, proportions, cfg.bag_size, cfg.seed)
    log.info("built %d bags of size %d", len(bag_list), cfg.bag_size)

    _write_manifest(out / "manifest.txt", cfg, data_path, prop_path, out)

    params = init_params(cfg.seed, _arch_for(cfg))
    if dataset.input_dim != cfg.input_dim:
        raise ConfigError(f"config input_dim={cfg.input_dim} but dataset has "
                          f"D_in={dataset.input_dim}")
    rng = np.random.default_rng(cfg.seed)

    def checkpoint_cb(stage, epoch, p):
        save_checkpoint(out / f"stage{stage}_epoch{epoch:04d}.ckpt", p)

    log1 = train_backbone(bag_list, params, cfg, rng, checkpoint_cb)
    save_checkpoint(out / "stage1.ckpt", params)
    log2 = train_head(bag_list, params, cfg, rng, checkpoint_cb)
    save_checkpoint(out / "model.ckpt", params)

    log1.rows.extend(log2.rows)
    log1.write_csv(out / "train_log.csv")
    stage1 = log1.stage_losses(1)
    if stage1:
        print(f"stage 1: {len(stage1)} steps, first loss {stage1[0]:.4f}, "
              f"last loss {stage1[-1]:.4f}")
    stage2 = log1.stage_losses(2)
    if stage2:
        print(f"stage 2: {len(stage2)} epochs, final mean proportion loss {stage2[-1]:.4f}")
    print(f"wrote {out / 'model.ckpt'}")
    return 0


def _parse_class_order(text: str, num_classes: int) -> tuple[int, ...]:
    try:
        order = tuple(int(s) for s in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --class-order {text!r}") from exc
    if sorted(order) != list(range(1, num_classes + 1)):
        raise ConfigError(f"--class-order must be a permutation of 1..{num_classes}")
    return order


def _cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    if dataset.input_dim != params.arch.input_dim:
        raise ConfigError(
            f"architecture mismatch: checkpoint expects D_in={params.arch.input_dim}, "
            f"dataset has D_in={dataset.input_dim}")
    if dataset.num_classes != params.arch.num_classes:
        raise ConfigError(
            f"architecture mismatch: checkpoint has K={params.arch.num_classes}, "
            f"dataset has K={dataset.num_classes}")
    order = None
    if args.class_order:
        order = _parse_class_order(args.class_order, dataset.num_classes)
    predicted = predict_classes(params, dataset.features)
    report = evaluate(predicted, dataset.true_classes, dataset.num_classes, order)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(report.to_csv(), encoding="ascii")
    (out / "metrics.txt").write_text(report.to_kv(), encoding="ascii")
    (out / "confusion.csv").write_text(report.confusion_csv(), encoding="ascii")
    print(report.to_text(), end="")
    print(f"wrote metrics to {out}")
    return 0


def _cmd_inspect_hist(args) -> int:
    cfg = _load_cfg(args)
    params = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    proportions = load_proportion_table(_proportions_path(args), dataset.num_classes)
    date_a, _, date_b = args.bags.partition(",")
    date_a, date_b = date_a.strip(), date_b.strip()
    known = set(dataset.dates)
    for d in (date_a, date_b):
        if d not in known:
            raise ConfigError(f"unknown date label {d!r}; dataset has "
                              + ", ".join(sorted(known)))

    bag_list = build_bags(dataset, proportions, cfg.bag_size, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    bag_a = next(b for b in bag_list if b.date == date_a)
    candidates = [b for b in bag_list if b.date == date_b and b is not bag_a]
    if not candidates:
        raise ConfigError(f"need two distinct bags for {date_a!r} vs {date_b!r}")
    bag_b = candidates[0]

    pairing = rng.permutation(len(bag_b))
    feats_a = backbone_forward(params.backbone, bag_a.instances).detach()
    feats_b = backbone_forward(params.backbone, bag_b.instances[pairing]).detach()
    sims = pairwise_scaled_cosine(feats_a, feats_b)
    predicted = gaussian_histogram(sims, cfg.bins, cfg.sigma)
    target = discretize_ground_truth(ground_truth_pdf(bag_a.proportions, bag_b.proportions),
                                     cfg.bins, cfg.sigma, cfg.gt_smoothing)
    kl = kl_divergence(predicted.values, target.values).item()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["bin_center,p_hat,p"]
    p_hat = predicted.values_array()
    p = target.values_array()
    for center, ph, pt in zip(predicted.centers, p_hat, p):
        lines.append(f"{center!r},{ph!r},{pt!r}")
    lines.append(f"# kl={kl!r}")
    (out / "histogram.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"bags {date_a} vs {date_b}: KL(predicted || target) = {kl:.6f}")
    print(f"wrote {out / 'histogram.csv'}")
    return 0


# -- argument parsing ---------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value experiment config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--bins", type=int, help="override histogram bin count")
    parser.add_argument("--sigma", type=float, help="override Gaussian-expansion sigma")
    parser.add_argument("--deterministic", action="store_true",
                        help="force fully serial, reproducible execution")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oslsp",
                                     description="Ordinal-scale learning from similarity proportions")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic ordinal dataset")
    _add_common(gen)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(handler=_cmd_gen_data)

    tr = sub.add_parser("train", help="run two-stage training")
    _add_common(tr)
    tr.add_argument("--data", required=True, help="dataset CSV")
    tr.add_argument("--proportions", help="proportion table (default: proportions.csv "
                                          "next to the dataset)")
    tr.add_argument("--out", required=True, help="output directory")
    tr.set_defaults(handler=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on labeled data")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True, help="dataset CSV with true classes")
    ev.add_argument("--out", required=True, help="output directory")
    ev.add_argument("--class-order", dest="class_order",
                    help="comma-separated class permutation for the ordinal RMSE")
    ev.set_defaults(handler=_cmd_eval)

    ih = sub.add_parser("inspect-hist", help="dump predicted vs target histograms "
                                             "for one bag pair")
    _add_common(ih)
    ih.add_argument("--checkpoint", required=True)
    ih.add_argument("--data", required=True)
    ih.add_argument("--proportions")
    ih.add_argument("--bags", required=True, metavar="DATE_A,DATE_B",
                    help="date labels of the two bags")
    ih.add_argument("--out", required=True)
    ih.set_defaults(handler=_cmd_inspect_hist)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, DatasetFormatError, CheckpointError, TrainingError,
            ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _FAILURE_EXIT


if __name__ == "__main__":
    sys.exit(main())
