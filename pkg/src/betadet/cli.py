"""Command-line surface.

Subcommands: ``gen`` (synthetic dataset), ``train`` (checkpoint + loss
log), ``eval`` (metrics report), ``predict`` (raw per-query detections),
``plot-beta`` (density table for one parameter pair), ``gradcheck``
(end-to-end gradient verification).

Exit codes: 0 success, 2 usage or input error, 3 numeric divergence
during training, 4 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import autograd as ag
from . import evalkit, synthdata
from .betadist import BetaParams, log_pdf
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_config
from .gradcheck import TOLERANCE, run_gradcheck
from .model import Detector, detections
from .train import TrainingDiverged, loss_log_csv, train

_EVAL_BATCH = 16


def _cmd_gen(args) -> int:
    if args.count < 1:
        print("gen: --count must be >= 1", file=sys.stderr)
        return 2
    scenes = synthdata.generate(args.seed, args.count)
    synthdata.write_dataset(scenes, args.out)
    counts = [0, 0, 0]
    for scene in scenes:
        for obj in scene.objects:
            counts[obj.stage] += 1
    total = sum(counts)
    print(f"wrote {len(scenes)} scenes, {total} objects to {args.out}")
    for stage, name in enumerate(synthdata.STAGE_NAMES):
        print(f"  {name}: {counts[stage]}")
    return 0


def _cmd_train(args) -> int:
    run_cfg = load_config(args.config) if args.config else RunConfig()
    scenes = synthdata.read_dataset(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = train(run_cfg, scenes)
    except TrainingDiverged as e:
        print(f"train: {e}", file=sys.stderr)
        return 3
    save_checkpoint(out_dir / "checkpoint.ckpt", result.detector, run_cfg,
                    run_cfg.steps)
    (out_dir / "loss_log.csv").write_text(loss_log_csv(result.loss_rows))
    first, last = result.loss_rows[0], result.loss_rows[-1]
    print(f"trained {run_cfg.steps} steps on {len(scenes)} scenes")
    print(f"loss: step {first[0]} total {first[1]:.4f} -> step {last[0]} total {last[1]:.4f}")
    print(f"checkpoint: {out_dir / 'checkpoint.ckpt'}")
    return 0


def _final_layer_detections(detector: Detector, scenes) -> list:
    dets_by_image = []
    for start in range(0, len(scenes), _EVAL_BATCH):
        chunk = scenes[start:start + _EVAL_BATCH]
        images = np.stack([s.image for s in chunk])
        with ag.no_grad():
            final = detector.forward(images)[-1]
        for b in range(len(chunk)):
            dets_by_image.append(detections(final, b))
    return dets_by_image


def _cmd_eval(args) -> int:
    detector, _, _ = load_checkpoint(args.ckpt)
    scenes = synthdata.read_dataset(args.data)
    dets_by_image = _final_layer_detections(detector, scenes)
    gts_by_image = [s.objects for s in scenes]
    report = evalkit.evaluate(dets_by_image, gts_by_image,
                              score_threshold=args.threshold)
    Path(args.out).write_text(evalkit.report_csv(report))
    print(evalkit.report_table(report), end="")
    return 0


def _cmd_predict(args) -> int:
    detector, _, _ = load_checkpoint(args.ckpt)
    scenes = synthdata.read_dataset(args.data)
    dets_by_image = _final_layer_detections(detector, scenes)
    lines = ["image,cx,cy,w,h,p_obj,alpha,beta"]
    for img, dets in enumerate(dets_by_image):
        for d in dets:
            lines.append(
                f"{img},{d.box.cx:.9g},{d.box.cy:.9g},{d.box.w:.9g},{d.box.h:.9g},"
                f"{d.p_obj:.9g},{d.maturity.alpha:.9g},{d.maturity.beta:.9g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {sum(len(d) for d in dets_by_image)} detections to {args.out}")
    return 0


def _cmd_plot_beta(args) -> int:
    if not (math.isfinite(args.alpha) and math.isfinite(args.beta)) \
            or args.alpha < 0.5 or args.beta < 0.5:
        print("plot-beta: --alpha and --beta must be finite and >= 0.5",
              file=sys.stderr)
        return 2
    params = BetaParams(args.alpha, args.beta)
    lines = ["y,pdf"]
    for y in np.linspace(0.001, 0.999, 501):
        lines.append(f"{y:.9g},{math.exp(log_pdf(params, float(y))):.9g}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote 501 density rows to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    err, worst = run_gradcheck(args.seed)
    print(f"max relative gradient error: {err:.3e} (parameter {worst})")
    if err > TOLERANCE:
        print(f"gradcheck: FAIL, tolerance {TOLERANCE:g} exceeded at parameter "
              f"{worst}", file=sys.stderr)
        return 4
    print(f"gradcheck: PASS (tolerance {TOLERANCE:g})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="betadet",
        description="Desk-scale probabilistic maturity detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train a detector")
    p.add_argument("--config", default=None, help="run config file (defaults if omitted)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="eval_report.csv", help="report CSV path")
    p.add_argument("--threshold", type=float, default=0.30,
                   help="objectness threshold for maturity metrics")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="dump per-query detections as CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("plot-beta", help="tabulate one Beta density")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plot_beta)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"{args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
