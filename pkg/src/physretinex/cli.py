"""Command-line surface.

Subcommands:

    prior      extract a task prior map from one image
    decompose  split an image into reflectance and illumination
    train      optimize a model on a paired degraded/clean dataset
    restore    run inference, optionally tiled for large images
    eval       score predictions against ground truth (PSNR / SSIM)

Every command is deterministic given its flags, config file, and seed.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import engine as E
from .config import RunConfig, load_run_config
from .errors import (
    ConfigurationError,
    ContractError,
    CorruptCheckpointError,
    DatasetError,
    DimensionError,
    UnsupportedFormatError,
)
from .imageio import load_image, save_gray, save_image
from .losses import psnr, ssim
from .model import TASKS, RestorationModel
from .priors import dark_channel, rain_mask_gt, shadow_prior, structure_prior
from .tiling import TileSpec, tiled_inference
from .trainer import load_dataset, load_model, train

log = logging.getLogger("physretinex")


def _pad_to_multiple(image, mult=4):
    """Reflective-pad [H, W, 3] on the bottom/right to a multiple of
    ``mult``; returns the padded image and the original extent."""
    h, w = image.shape[:2]
    ph, pw = (-h) % mult, (-w) % mult
    if ph or pw:
        log.info("reflective-padding %dx%d to %dx%d", h, w, h + ph, w + pw)
        image = np.pad(image, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    return image, (h, w)


def _run_config(args):
    config = load_run_config(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "task", None):
        config.task = args.task
    return config.validate()


def cmd_prior(args, parser):
    image = load_image(args.input)
    if args.task == "dehaze":
        prior = dark_channel(image)
    elif args.task == "lowlight":
        prior = structure_prior(image, tuple(args.sigma))
    elif args.task == "deshadow":
        prior = shadow_prior(image, args.theta)
    else:
        if not args.blur_input:
            parser.error("--blur-input is required for --task derain")
        prior = rain_mask_gt(image, load_image(args.blur_input), args.alpha)
    save_gray(args.output, prior)
    print(f"min {prior.min():.6f} max {prior.max():.6f} mean {prior.mean():.6f}")
    return 0


def cmd_decompose(args, parser):
    config = _run_config(args)
    model_config = config.model_config()
    if not model_config.dual_branch:
        raise ConfigurationError("decompose requires dual_branch=true")
    if args.checkpoint:
        model = load_model(args.checkpoint, model_config, seed=args.seed)
    else:
        model = RestorationModel(model_config, seed=args.seed)
    image = load_image(args.input)
    with E.no_grad():
        reflectance, illumination = model.decompose(image)
    save_image(args.reflectance, np.clip(reflectance.data.transpose(1, 2, 0), 0.0, 1.0))
    save_image(args.illumination, np.clip(illumination.data.transpose(1, 2, 0), 0.0, 1.0))
    return 0


def cmd_train(args, parser):
    config = _run_config(args)
    data_dir = args.data or config.data_dir
    out_path = args.out or config.out_path
    if not data_dir:
        parser.error("--data is required (or set data_dir in the config)")
    if not out_path:
        parser.error("--out is required (or set out_path in the config)")
    pairs = load_dataset(data_dir, load_image)
    model = RestorationModel(config.model_config(), seed=config.seed)
    path, metrics = train(
        model,
        config.train_config(),
        pairs,
        out_path,
        loss_weights=config.loss_weights(),
        resume=args.resume,
    )
    if metrics:
        print(f"trained {len(metrics)} steps, final loss {metrics[-1]['loss']:.6f}")
    print(f"saved checkpoint {path}")
    return 0


def cmd_restore(args, parser):
    config = _run_config(args)
    model = load_model(args.checkpoint, config.model_config(), seed=config.seed)
    image = load_image(args.input)
    padded, (h, w) = _pad_to_multiple(image)

    if args.tile:
        spec = TileSpec(
            tile=args.tile,
            overlap=args.overlap if args.overlap is not None else config.overlap,
        ).validate()
        restored = tiled_inference(padded, model.restore, spec)
    else:
        restored = model.restore(padded)
    save_image(args.output, restored[:h, :w])
    return 0


def cmd_eval(args, parser):
    pred = {f for f in os.listdir(args.pred_dir) if f.lower().endswith(".png")}
    gt = {f for f in os.listdir(args.gt_dir) if f.lower().endswith(".png")}
    unpaired = sorted(pred.symmetric_difference(gt))
    if unpaired:
        raise DatasetError(f"unpaired files: {unpaired}")
    if not pred:
        raise DatasetError("no .png files to evaluate")
    lines = []
    psnr_values, ssim_values = [], []
    for name in sorted(pred):
        x = load_image(os.path.join(args.pred_dir, name))
        y = load_image(os.path.join(args.gt_dir, name))
        p = psnr(x, y)
        with E.no_grad():
            s = ssim(x.transpose(2, 0, 1), y.transpose(2, 0, 1)).item()
        psnr_values.append(p)
        ssim_values.append(s)
        lines.append(f"{name} {_fmt_psnr(p)} {s:.6f}")
    mean_p = sum(psnr_values) / len(psnr_values)
    mean_s = sum(ssim_values) / len(ssim_values)
    lines.append(f"MEAN {_fmt_psnr(mean_p)} {mean_s:.6f}")
    report = "\n".join(lines) + "\n"
    with open(args.report, "w", encoding="utf-8") as fh:
        fh.write(report)
    sys.stdout.write(report)
    return 0


def _fmt_psnr(value):
    return "inf" if math.isinf(value) else f"{value:.4f}"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="physretinex",
        description="Prior-conditioned Retinex image restoration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prior", help="extract a task prior map")
    p.add_argument("--task", required=True, choices=sorted(TASKS))
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--theta", type=float, default=0.0, help="shadow projection angle (rad)")
    p.add_argument("--alpha", type=float, default=5.0, help="rain mask gain")
    p.add_argument("--sigma", type=float, nargs="+", default=[1.0], help="structure prior scales")
    p.add_argument("--blur-input", help="reference image for the rain mask")
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("decompose", help="split into reflectance and illumination")
    p.add_argument("--input", required=True)
    p.add_argument("--reflectance", required=True)
    p.add_argument("--illumination", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("train", help="optimize on a degraded/clean dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="dataset directory with degraded/ and clean/")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("restore", help="run inference on an image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", required=True, choices=sorted(TASKS))
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tile", type=int, help="tile size for tiled inference")
    p.add_argument("--overlap", type=int, help="tile overlap (default from config)")
    p.add_argument("--config")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (
        ConfigurationError,
        ContractError,
        CorruptCheckpointError,
        DatasetError,
        DimensionError,
        UnsupportedFormatError,
        FileNotFoundError,
        NotADirectoryError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
