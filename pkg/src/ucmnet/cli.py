"""Command-line interface.

Commands: train, eval, predict, profile, ablate, split.
Exit codes: 0 ok, 2 config error, 3 data/file error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from PIL import Image

from . import tensor as T
from .config import ConfigError, RunConfig, default_config_text, load_config
from .data import DataError, make_split, read_manifest, write_manifest
from .model import VARIANT_A, VARIANT_B, VARIANT_C, build_variant
from .profiler import cost_report
from .serialize import WeightFileError, load_weights
from .tensor import Tensor, no_grad
from .training import NumericAbort, evaluate, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load_run_config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _build_model(cfg: RunConfig, seed=None):
    return build_variant(cfg.network_config(),
                         seed=cfg.seed if seed is None else seed)


def cmd_train(args) -> int:
    cfg = _load_run_config(args.config)
    if args.manifest:
        cfg.manifest = args.manifest
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.seed is not None:
        cfg.seed = args.seed
    if args.checkpoint_dir:
        cfg.checkpoint_dir = args.checkpoint_dir
    if not cfg.manifest:
        raise ConfigError("no manifest configured (set 'manifest' or pass --manifest)")
    manifest = read_manifest(cfg.manifest, cfg.data_root or None)
    model = _build_model(cfg)
    _, best = train(model, manifest, cfg.input_size, cfg.train_config(),
                    cfg.loss_config(), log=lambda line: print(line, flush=True))
    print(f"best epoch {best['epoch']} (test mIoU {best['miou']:.4f}); "
          f"checkpoints in {cfg.checkpoint_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_run_config(args.config)
    manifest = read_manifest(args.manifest, cfg.data_root or None)
    model = _build_model(cfg)
    load_weights(model, args.weights)
    report = evaluate(model, manifest, args.split, cfg.input_size,
                      threshold=cfg.threshold, smooth=cfg.smooth)
    print(report)
    if args.out:
        report.write_csv(args.out, split=args.split)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _load_run_config(args.config)
    model = _build_model(cfg)
    load_weights(model, args.weights)
    model.eval()
    try:
        img = Image.open(args.image).convert("RGB")
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {args.image}: {exc}") from exc
    orig_w, orig_h = img.size
    h, w = cfg.input_size
    arr = np.asarray(img.resize((w, h), Image.BILINEAR), dtype=np.float32)
    x = Tensor(arr.transpose(2, 0, 1)[None] / 255.0)
    with no_grad():
        logits, _ = model(x)
        probs = T.sigmoid(logits).numpy()[0, 0]
    mask = np.where(probs >= cfg.threshold, 255, 0).astype(np.uint8)
    out_img = Image.fromarray(mask, mode="L").resize((orig_w, orig_h), Image.NEAREST)
    try:
        out_img.save(args.out, format="PNG")
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {args.out} ({orig_w}x{orig_h})")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = _load_run_config(args.config)
    model = _build_model(cfg, seed=0)
    h, w = cfg.input_size
    report = cost_report(model, (1, 3, h, w))
    print(report.to_text())
    if args.csv:
        report.write_csv(args.csv)
        print(f"wrote {args.csv}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_run_config(args.config)
    h, w = cfg.input_size
    print(f"{'model':<24}{'params':>10}{'gflops':>10}")
    for kind in (VARIANT_A, VARIANT_B, VARIANT_C):
        net_cfg = cfg.network_config()
        net_cfg.block_kind = kind
        model = build_variant(net_cfg, seed=0)
        report = cost_report(model, (1, 3, h, w))
        print(f"{kind:<24}{report.total_params:>10}{report.gflops_mac:>10.4f}")
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = read_manifest(args.manifest)
    manifest.records = make_split(manifest.records, ratio=args.ratio,
                                  seed=args.seed)
    write_manifest(manifest, args.out)
    n_train = sum(1 for r in manifest.records if r.split == "train")
    print(f"wrote {args.out}: {n_train} train / {len(manifest.records) - n_train} test")
    return EXIT_OK


def cmd_init_config(args) -> int:
    text = default_config_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ucmnet",
                                description="lightweight lesion segmentation engine")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the training recipe")
    t.add_argument("--config", default="", help="key=value config file")
    t.add_argument("--manifest", default="", help="override manifest CSV path")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--checkpoint-dir", default="")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a weight file on a split")
    e.add_argument("--weights", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--config", default="")
    e.add_argument("--split", default="test", choices=["train", "test"])
    e.add_argument("--out", default="", help="write metrics CSV here")
    e.set_defaults(fn=cmd_eval)

    pr = sub.add_parser("predict", help="segment one image to a 0/255 PNG mask")
    pr.add_argument("--weights", required=True)
    pr.add_argument("--image", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--config", default="")
    pr.set_defaults(fn=cmd_predict)

    pf = sub.add_parser("profile", help="print the cost report")
    pf.add_argument("--config", default="")
    pf.add_argument("--csv", default="", help="also write per-layer CSV")
    pf.set_defaults(fn=cmd_profile)

    ab = sub.add_parser("ablate", help="params/GFLOPs for the block variants")
    ab.add_argument("--config", default="")
    ab.set_defaults(fn=cmd_ablate)

    sp = sub.add_parser("split", help="assign train/test splits in a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ratio", type=float, default=0.7)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_split)

    ic = sub.add_parser("init-config", help="print or write the default config")
    ic.add_argument("--out", default="")
    ic.set_defaults(fn=cmd_init_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, WeightFileError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericAbort as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
