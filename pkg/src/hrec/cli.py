"""Command-line entry point: ``hrec <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audit import EPS, TOLERANCE, run_audit
from .config import TrainConfig, parse_config
from .dataset import SplitSpec, SyntheticConfig, generate_synthetic, load_dataset, save_dataset, split_by_video
from .evaluator import (
    DEFAULT_NS,
    EnsembleWeights,
    ensemble_predict,
    fit_linear_regression,
    pool_predictions,
    random_baseline,
    read_predictions,
    score_predictions,
    select_models,
    write_predictions,
    write_report,
)
from .model import predict_dataset
from .trainer import Checkpoint, pretrain_selfsup, train_multitask, train_supervised

_DEFAULTS = TrainConfig()

# flag -> (TrainConfig field, type, help)
_TRAIN_FLAGS = {
    "--sfd": ("sfd", int, "segment embedding width"),
    "--vd": ("vd", int, "video context width"),
    "--d-h": ("d_h", int, "GRU hidden width"),
    "--gru-layers": ("gru_layers", int, "stacked bi-GRU layers"),
    "--kernel-size": ("kernel_size", int, "temporal conv kernel size"),
    "--alpha": ("alpha", float, "shuffle ratio for the odd-position task"),
    "--beta": ("beta", float, "weight of the odd-position loss"),
    "--portions": ("portions", int, "portion-averaging groups (1 = off)"),
    "--dropout": ("dropout_p", float, "dropout after the SegNet bottleneck"),
    "--lr": ("lr", float, "Adam learning rate"),
    "--epochs": ("epochs", int, "training epochs"),
    "--seed": ("seed", int, "seed for init, split, ordering and all sampling"),
    "--ns": ("n_s", int, "summary length N_s for validation scoring"),
}


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset manifest (training data)")
    p.add_argument("--val", help="validation manifest (default: split --data by video)")
    p.add_argument("--train-fraction", type=float, default=5 / 6, help="train share when splitting (default: 5/6)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="flat JSON file with TrainConfig keys")
    p.add_argument("--dim", type=int, help="shorthand setting --sfd, --vd and --d-h together")
    for flag, (name, typ, text) in _TRAIN_FLAGS.items():
        p.add_argument(flag, dest=name, type=typ, default=None, help=f"{text} (default: {getattr(_DEFAULTS, name)})")
    p.add_argument(
        "--augment-at-inference",
        dest="augment_at_inference",
        action="store_const",
        const=True,
        default=None,
        help="apply portion averaging during evaluation too (default: off)",
    )


def _train_config(args) -> TrainConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(TrainConfig)}
    if args.dim is not None:
        for key in ("sfd", "vd", "d_h"):
            overrides[key] = overrides[key] if overrides[key] is not None else args.dim
    return parse_config(args.config, overrides)


def _datasets(args, config: TrainConfig):
    data = load_dataset(args.data)
    if args.val:
        return data, load_dataset(args.val)
    return split_by_video(data, SplitSpec(args.train_fraction, config.seed))


def _finish_training(out: Path, ckpt: Checkpoint, history) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ckpt.save(out / "checkpoint.hrec")
    history.save_csv(out / "history.csv")
    if history.best is not None:
        history.best.save(out / "best.hrec")
    last = history.records[-1] if history.records else {}
    print(json.dumps({"epochs": len(history.records), "best_epoch": history.best_epoch, "last": last}, sort_keys=True))


def cmd_synth(args) -> int:
    cfg = SyntheticConfig(
        num_videos=args.videos,
        t_n_range=(args.t_n_min, args.t_n_max),
        t_g=args.t_g,
        fd=args.fd,
        wd=args.wd,
        noise_std=args.noise,
        seed=args.seed,
    )
    path = save_dataset(generate_synthetic(cfg), args.out)
    print(path)
    return 0


def cmd_validate(args) -> int:
    ds = load_dataset(args.data)
    t_n = [r.t_n for r in ds]
    print(json.dumps({"videos": len(ds), "dims": ds.dims, "t_n_min": min(t_n, default=0), "t_n_max": max(t_n, default=0)}, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    config = _train_config(args)
    train, val = _datasets(args, config)
    _finish_training(Path(args.out), *train_supervised(config, train, val))
    return 0


def cmd_pretrain(args) -> int:
    if args.alpha is None:
        args.alpha = 0.15
    config = _train_config(args)
    train, val = _datasets(args, config)
    _finish_training(Path(args.out), *pretrain_selfsup(config, train, val))
    return 0


def cmd_train_multitask(args) -> int:
    config = _train_config(args)
    train, val = _datasets(args, config)
    pretrained = Checkpoint.load(args.pretrained) if args.pretrained else None
    _finish_training(Path(args.out), *train_multitask(config, train, val, pretrained))
    return 0


def cmd_predict(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    ds = load_dataset(args.data)
    if ds.dims != ckpt.dims:
        raise ValueError(f"dataset dims {ds.dims} do not match checkpoint dims {ckpt.dims}")
    write_predictions(args.out, predict_dataset(ckpt.params, ds, ckpt.config, ckpt.divisor))
    return 0


def cmd_eval(args) -> int:
    ds = load_dataset(args.data)
    report = score_predictions(read_predictions(args.predictions), ds, args.ns)
    if args.out:
        write_report(args.out, report)
    print(f"summary_score {report.mean!r} over {report.n_videos} videos (N_s={report.n_s})")
    return 0


def cmd_baseline(args) -> int:
    ds = load_dataset(args.data)
    result = random_baseline(ds, args.ns, args.trials, args.seed, args.mode)
    text = json.dumps(result, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_ensemble_fit(args) -> int:
    ds = load_dataset(args.data)
    X, y = pool_predictions([read_predictions(p) for p in args.predictions], ds)
    weights = fit_linear_regression(X, y)
    payload = weights.to_dict()
    payload["models"] = [Path(p).name for p in args.predictions]
    payload["selected"] = select_models(weights)
    Path(args.out).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_ensemble_apply(args) -> int:
    weights = EnsembleWeights.from_dict(json.loads(Path(args.weights).read_text()))
    per_model = [read_predictions(p) for p in args.predictions]
    ids = sorted(per_model[0])
    out = {}
    for vid in ids:
        if any(vid not in m for m in per_model):
            raise ValueError(f"video {vid!r} missing from some prediction files")
        out[vid] = ensemble_predict(np.array([m[vid] for m in per_model]), weights)
    write_predictions(args.out, out)
    return 0


def cmd_gradcheck(args) -> int:
    seeds = [args.seed] if args.seed is not None else list(range(10))
    results = run_audit(seeds, args.eps)
    for name, err in results.items():
        print(f"{name:24s} {err:.3e}")
    worst = max(results.values())
    print(f"max relative error {worst:.3e} (seeds {seeds[0]}..{seeds[-1]}, eps {args.eps})")
    return 0 if worst <= TOLERANCE else 1


class _DefaultsFormatter(argparse.HelpFormatter):
    # like ArgumentDefaultsHelpFormatter, minus "(default: None)" and repeats
    def _get_help_string(self, action):
        text = action.help or ""
        if "default" in text or action.default in (None, argparse.SUPPRESS) or action.option_strings == []:
            return text
        return f"{text} (default: %(default)s)".strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrec", description="Segment-importance video summarization toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    fmt = _DefaultsFormatter

    p = sub.add_parser("synth", help="generate a synthetic dataset", formatter_class=fmt)
    p.add_argument("--videos", type=int, default=200, help="number of videos")
    p.add_argument("--t-n-min", type=int, default=12, help="fewest segments per video")
    p.add_argument("--t-n-max", type=int, default=24, help="most segments per video")
    p.add_argument("--t-g", type=int, default=16, help="frames per segment")
    p.add_argument("--fd", type=int, default=32, help="frame feature width")
    p.add_argument("--wd", type=int, default=16, help="segment feature width")
    p.add_argument("--noise", type=float, default=0.02, help="importance noise std")
    p.add_argument("--seed", type=int, default=42, help="generator seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="load a manifest and report its dims", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset manifest")
    p.set_defaults(func=cmd_validate)

    for name, func, text in (
        ("train", cmd_train, "supervised importance training"),
        ("pretrain", cmd_pretrain, "odd-position pretraining (alpha defaults to 0.15)"),
        ("train-multitask", cmd_train_multitask, "joint importance + odd-position training"),
    ):
        p = sub.add_parser(name, help=text)
        _add_train_flags(p)
        if name == "train-multitask":
            p.add_argument("--pretrained", help="checkpoint to initialise from (default: none)")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="score every segment of a dataset", formatter_class=fmt)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--data", required=True, help="dataset manifest to score")
    p.add_argument("--out", required=True, help="prediction CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="summary score of predictions", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset manifest with ground truth")
    p.add_argument("--predictions", required=True, help="prediction CSV")
    p.add_argument("--ns", type=int, default=DEFAULT_NS, help="segments selected per video")
    p.add_argument("--out", help="report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="random-selection baseline", formatter_class=fmt)
    p.add_argument("--data", required=True, help="dataset manifest with ground truth")
    p.add_argument("--ns", type=int, default=DEFAULT_NS, help="segments selected per video")
    p.add_argument("--trials", type=int, default=1000, help="subsets drawn per video in sample mode")
    p.add_argument("--mode", choices=("sample", "exact"), default="sample", help="sample subsets or compute the exact expectation")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--out", help="result JSON")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("ensemble-fit", help="fit linear-regression ensemble weights", formatter_class=fmt)
    p.add_argument("--data", required=True, help="validation manifest supplying targets")
    p.add_argument("--predictions", nargs="+", required=True, help="one prediction CSV per model")
    p.add_argument("--out", required=True, help="weights JSON")
    p.set_defaults(func=cmd_ensemble_fit)

    p = sub.add_parser("ensemble-apply", help="combine prediction files with fitted weights", formatter_class=fmt)
    p.add_argument("--weights", required=True, help="weights JSON from ensemble-fit")
    p.add_argument("--predictions", nargs="+", required=True, help="same order as at fit time")
    p.add_argument("--out", required=True, help="prediction CSV")
    p.set_defaults(func=cmd_ensemble_apply)

    p = sub.add_parser("gradcheck", help="finite-difference audit of all ops and the full network", formatter_class=fmt)
    p.add_argument("--seed", type=int, default=None, help="single seed (default: seeds 0-9)")
    p.add_argument("--eps", type=float, default=EPS, help="central-difference step")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"hrec {args.command}: error: {msg}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
