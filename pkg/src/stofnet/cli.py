"""Command-line entry point: ``stofnet {generate,train,infer,bench,plot}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .baselines import BASELINES
from .dataset import (
    SyntheticConfig,
    config_dict,
    generate_synthetic,
    load_dataset,
    read_manifest,
    save_dataset,
    split_train_val,
)
from .detection import DEFAULT_NMS_WINDOW
from .errors import InvalidArgumentError, StofnetError, UndefinedTPRError
from .evaluation import DEFAULT_TAU, benchmark
from .inference import NetworkDetector, calibrate_threshold, is_model_dir, network_scores, resolve_detector
from .model import ModelConfig, StofNet, load_model, save_model
from .training import TrainConfig, train

log = logging.getLogger("stofnet")

_TRAIN = TrainConfig()


class UsageError(Exception):
    """Raised for invalid combinations of otherwise well-formed arguments (exit 2)."""


def _configure_threads():
    threads = os.environ.get("STOFNET_THREADS")
    if threads:
        torch.set_num_threads(max(1, int(threads)))


def _write_text(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def cmd_generate(args) -> int:
    if args.length % 4:
        raise UsageError(f"--length {args.length} must be divisible by the contraction factor 4")
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise StofnetError(f"{out} exists and is not empty (use --force to overwrite)")
    cfg = SyntheticConfig(
        n_frames=args.frames,
        frame_length=args.length,
        echoes_min=args.echoes_min,
        echoes_max=args.echoes_max,
        min_separation=args.min_separation,
        center_frequency=args.center_frequency,
        bandwidth=args.bandwidth,
        snr_db=args.snr,
        seed=args.seed,
    )
    frames = generate_synthetic(cfg)
    save_dataset(out, frames, seed=args.seed, generator=config_dict(cfg))
    n_labels = sum(len(lf.truth_positions) for lf in frames)
    print(f"wrote {len(frames)} frames (N={args.length}, C=1, {n_labels} echoes, seed {args.seed}) to {out}")
    return 0


def cmd_train(args) -> int:
    frames = load_dataset(args.data)
    if not frames:
        raise StofnetError(f"{args.data} holds no frames")
    n, c = frames[0].frame.samples.shape
    mcfg = ModelConfig(F=args.features, R=args.upsample, S=args.contraction, C=c)
    if n % mcfg.S:
        raise UsageError(f"frame length {n} is not divisible by --contraction {mcfg.S}")
    tcfg = TrainConfig(
        batch_size=args.batch,
        lr_start=args.lr,
        max_epochs=args.epochs,
        lambda1=args.lambda1,
        weight_decay=args.weight_decay,
        crop=not args.no_crop,
        seed=args.seed,
    )
    torch.manual_seed(args.seed)
    train_set, val_set = split_train_val(frames, args.val_fraction)
    net = StofNet(mcfg, seed=args.seed)

    def report(rec):
        val = "n/a" if rec.val_loss is None else f"{rec.val_loss:.4f}"
        print(f"epoch {rec.epoch + 1:3d}  lr {rec.lr:.3e}  train {rec.train_loss:.4f}  val {val}", flush=True)

    net, history = train(net, train_set, val_set, tcfg, on_epoch=report)
    extra = {"train_config": vars(tcfg), "best_epoch": history.best_epoch}
    try:
        extra["threshold"] = calibrate_threshold(net, val_set or train_set, DEFAULT_TAU, args.window)
    except UndefinedTPRError:
        log.warning("validation split has no labels; no detection threshold stored")
    save_model(net, args.out, extra)
    (Path(args.out) / "history.json").write_text(json.dumps(history.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"saved model to {args.out} (best epoch {history.best_epoch})")
    return 0


def _threshold_arg(value: str):
    if value == "auto":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be 'auto' or a number, got {value!r}") from None


def _build_detector(tag, args, manifest):
    if tag not in BASELINES and not is_model_dir(tag):
        raise UsageError(f"unknown model {tag!r}; known tags: {', '.join(BASELINES)} or a model directory")
    threshold = args.threshold
    if args.mode == "multi" and threshold == "auto" and tag not in BASELINES:
        if args.val_data:
            threshold = calibrate_threshold(load_model(tag), load_dataset(args.val_data), args.tau, args.window)
        else:
            from .model import read_model_meta

            if read_model_meta(tag)["extra"].get("threshold") is None:
                raise UsageError("--mode multi needs --threshold <value>, --val-data, or a model with a stored threshold")
    try:
        return resolve_detector(tag, mode=args.mode, threshold=threshold, generator=manifest.get("generator"),
                                rel_threshold=args.rel_threshold, window=args.window)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from None


def _detections_json(dets) -> str:
    return json.dumps(dets, indent=1) + "\n"


def cmd_infer(args) -> int:
    manifest = read_manifest(args.input)
    frames = load_dataset(args.input)
    detector = _build_detector(args.model, args, manifest)
    out = []
    for i, lf in enumerate(frames):
        out.extend({"frame_index": i, "position": d.position, "confidence": d.confidence}
                   for d in detector.detect(lf.frame))
    _write_text(args.out, _detections_json(out))
    return 0


def cmd_bench(args) -> int:
    tags = [t for t in args.models.split(",") if t]
    manifest = read_manifest(args.data)
    frames = load_dataset(args.data)
    detectors = [_build_detector(t, args, manifest) for t in tags]
    report = benchmark(detectors, frames, tau=args.tau, seed=args.seed)
    _write_text(args.out, report.to_csv() if args.format == "csv" else report.to_json())
    if args.detections:
        _write_text(args.detections, json.dumps(report.detections, indent=1) + "\n")
    if args.out not in (None, "-"):
        print(report.table())
    return 0


def cmd_plot(args) -> int:
    frames = load_dataset(args.data)
    if not 0 <= args.frame < len(frames):
        raise UsageError(f"--frame {args.frame} out of range (dataset has {len(frames)} frames)")
    lf = frames[args.frame]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = lf.frame.samples
    with open(out / "signal.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample"] + [f"ch{c}" for c in range(samples.shape[1])])
        for i, row in enumerate(samples):
            w.writerow([i] + [repr(float(v)) for v in row])
    with open(out / "truth.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position"])
        w.writerows([[repr(p)] for p in lf.truth_positions])
    if args.model:
        if not is_model_dir(args.model):
            raise UsageError(f"{args.model} is not a model directory")
        net = load_model(args.model)
        scores = network_scores(net, [lf.frame])[0]
        R = net.config.R
        with open(out / "scores.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "position", "score"])
            for i, s in enumerate(scores):
                w.writerow([i, repr(i / R), repr(float(s))])
    if args.detections:
        dets = json.loads(Path(args.detections).read_text(encoding="utf-8"))
        if isinstance(dets, dict):  # bench output: {model: [...]}
            dets = [d for rows in dets.values() for d in rows]
        with open(out / "detections.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["position", "confidence"])
            for d in dets:
                if d["frame_index"] == args.frame:
                    w.writerow([repr(d["position"]), repr(d["confidence"])])
    print(f"wrote plot data for frame {args.frame} to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="stofnet", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic pulse-echo dataset", formatter_class=fmt)
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--frames", type=int, default=100, help="number of frames")
    g.add_argument("--length", type=int, default=1024, help="samples per frame (divisible by 4)")
    g.add_argument("--echoes-min", type=int, default=1, help="fewest echoes per frame")
    g.add_argument("--echoes-max", type=int, default=3, help="most echoes per frame")
    g.add_argument("--min-separation", type=float, default=SyntheticConfig.min_separation, help="samples")
    g.add_argument("--center-frequency", type=float, default=SyntheticConfig.center_frequency,
                   help="pulse carrier as a fraction of the sample rate")
    g.add_argument("--bandwidth", type=float, default=SyntheticConfig.bandwidth,
                   help="-6 dB pulse bandwidth as a fraction of the sample rate")
    g.add_argument("--snr", type=float, default=30.0, help="SNR in dB (inf disables noise)")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a network on a dataset", formatter_class=fmt)
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="output model directory")
    t.add_argument("--epochs", type=int, default=_TRAIN.max_epochs, help="maximum epochs")
    t.add_argument("--batch", type=int, default=_TRAIN.batch_size, help="frames per step")
    t.add_argument("--lr", type=float, default=_TRAIN.lr_start, help="start learning rate (cosine annealed)")
    t.add_argument("--lambda1", type=float, default=_TRAIN.lambda1, help="L1 sparsity weight on the scores")
    t.add_argument("--weight-decay", type=float, default=_TRAIN.weight_decay, help="AdamW weight decay")
    t.add_argument("--features", type=int, default=64, help="feature channels F")
    t.add_argument("--upsample", type=int, default=4, help="upsampling factor R")
    t.add_argument("--contraction", type=int, default=4, help="context-block contraction S")
    t.add_argument("--val-fraction", type=float, default=0.1, help="trailing fraction held out for validation")
    t.add_argument("--window", type=int, default=DEFAULT_NMS_WINDOW, help="NMS window for threshold calibration")
    t.add_argument("--no-crop", action="store_true", help="disable random crop augmentation")
    t.add_argument("--seed", type=int, default=_TRAIN.seed, help="initialization and augmentation seed")
    t.set_defaults(func=cmd_train)

    def detector_flags(p):
        p.add_argument("--mode", choices=["single", "multi"], default="single",
                       help="argmax (single) or threshold + NMS (multi)")
        p.add_argument("--threshold", type=_threshold_arg, default="auto",
                       help="NMS threshold or 'auto' (g-means on --val-data, else the stored one)")
        p.add_argument("--val-data", help="labeled dataset for threshold calibration")
        p.add_argument("--window", type=int, default=DEFAULT_NMS_WINDOW, help="NMS window in upsampled samples")
        p.add_argument("--rel-threshold", type=float, default=0.3, help="relative level for baseline detectors")
        p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="matching tolerance in samples")

    i = sub.add_parser("infer", help="detect echoes with a model or baseline", formatter_class=fmt)
    i.add_argument("--model", required=True, help=f"model directory or baseline tag ({', '.join(BASELINES)})")
    i.add_argument("--input", required=True, help="dataset directory")
    i.add_argument("--out", help="detections JSON path (stdout if omitted)")
    detector_flags(i)
    i.set_defaults(func=cmd_infer)

    b = sub.add_parser("bench", help="benchmark models on a labeled dataset", formatter_class=fmt)
    b.add_argument("--models", required=True, help="comma-separated model directories and/or baseline tags")
    b.add_argument("--data", required=True, help="labeled dataset directory")
    b.add_argument("--format", choices=["json", "csv"], default="json", help="report format")
    b.add_argument("--out", help="report path (stdout if omitted)")
    b.add_argument("--detections", help="also write per-model detections JSON here")
    b.add_argument("--seed", type=int, default=0, help="seed for stochastic models")
    detector_flags(b)
    b.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="emit CSV series for plotting one frame", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--frame", type=int, default=0, help="frame index")
    p.add_argument("--out", required=True, help="output directory for CSV files")
    p.add_argument("--detections", help="detections JSON from infer or bench")
    p.add_argument("--model", help="model directory; adds the network score series")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _configure_threads()
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (StofnetError, OSError, json.JSONDecodeError) as exc:
        print(f"stofnet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
