"""Command-line interface.

Every config key can come from ``--config FILE`` (``key = value`` lines) and
be overridden with ``--key value``. Exit codes: 0 ok, 2 config error,
3 I/O error, 4 shape or weight mismatch.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import edge_ops, mask_engine, networks
from .archive import read_archive
from .config import KEYS, ConfigError, load_config
from .errors import ParameterError, ShapeError, WeightArchiveError, WeightMismatchError
from .imageio import load_image, save_image
from .pipeline import build_models, evaluate, load_items, run_inference, sigma_sweep

EXIT_CONFIG, EXIT_IO, EXIT_MISMATCH = 2, 3, 4

log = logging.getLogger("edge_inpaint")


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="flat 'key = value' config file")
    g = p.add_argument_group("config overrides")
    for key in KEYS:
        flags = [f"--{key}"]
        if "_" in key:
            flags.append(f"--{key.replace('_', '-')}")
        g.add_argument(*flags, dest=f"cfg_{key}", metavar="VALUE", default=None)
    return p


def _cfg(args):
    overrides = {
        k: getattr(args, f"cfg_{k}") for k in KEYS if getattr(args, f"cfg_{k}", None) is not None
    }
    return load_config(args.config, overrides)


def cmd_canny(args) -> int:
    cfg = _cfg(args)
    img = load_image(args.image)
    edges = edge_ops.canny(edge_ops.to_grayscale(img), cfg.canny_params())
    save_image(edges, args.output)
    print(f"{int(edges.sum())} edge pixels ({edges.mean():.4%}) -> {args.output}")
    return 0


def cmd_mask(args) -> int:
    cfg = _cfg(args)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.augment:
        src = mask_engine.load_mask(args.augment)
        for i, m in enumerate(mask_engine.augment_mask(src)):
            path = out_dir / f"{Path(args.augment).stem}_aug{i}.png"
            mask_engine.save_mask(m, path)
            print(f"{path} {mask_engine.coverage_class(m)}")
        return 0
    size = args.size or cfg.image_size
    for i in range(args.count):
        m = mask_engine.regular_mask(size, size, cfg.effective_mask_ratio, cfg.seed + i,
                                     cfg.mask_placement)
        path = out_dir / f"mask_{i:04d}.png"
        mask_engine.save_mask(m, path)
        print(f"{path} coverage={mask_engine.coverage(m):.4f} {mask_engine.coverage_class(m)}")
    return 0


def cmd_infer(args) -> int:
    cfg = _cfg(args)
    items, skipped = load_items(cfg, [args.image])
    if skipped:
        raise OSError(f"cannot read image {args.image}")
    ident, img = items[0]
    if args.mask:
        m = mask_engine.load_mask(args.mask)
        if m.shape != img.shape[2:]:
            raise ShapeError(f"mask {m.shape} does not match image {img.shape[2:]}")
    else:
        m = mask_engine.regular_mask(cfg.image_size, cfg.image_size, cfg.effective_mask_ratio,
                                     cfg.seed, cfg.mask_placement)
    out = run_inference(cfg, img, m, build_models(cfg))
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(ident).stem
    save_image(m.astype(np.float32), out_dir / f"{stem}_mask.png")
    for key in ("c_pred", "c_comp", "i_pred", "i_comp"):
        save_image(out[key], out_dir / f"{stem}_{key}.png")
    print(f"wrote {stem}_{{mask,c_pred,c_comp,i_pred,i_comp}}.png to {out_dir}")
    return 0


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def cmd_eval(args) -> int:
    cfg = _cfg(args)
    report, text = evaluate(cfg, args.images)
    _write(text, args.report)
    if report.skipped:
        log.warning("%d input(s) skipped", report.skipped)
    return 0


def cmd_sweep(args) -> int:
    cfg = _cfg(args)
    try:
        sigmas = [float(s) for s in args.sigmas.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --sigmas list {args.sigmas!r}") from exc
    _, text = sigma_sweep(cfg, args.images, sigmas, include_metrics=args.metrics or None)
    _write(text, args.report)
    return 0


def cmd_weights_inspect(args) -> int:
    tensors = read_archive(args.path)
    total = 0
    for name, arr in tensors.items():
        print(f"{name}\t{'x'.join(map(str, arr.shape)) or 'scalar'}\t{arr.size}")
        total += arr.size
    print(f"{len(tensors)} tensors, {total} values")
    return 0


_BUILDERS = {
    "G1": lambda s: networks.build_generator("edge", s),
    "G2": lambda s: networks.build_generator("inpaint", s),
    "D1": lambda s: networks.build_discriminator("edge", s),
    "D2": lambda s: networks.build_discriminator("inpaint", s),
}


def cmd_weights_init(args) -> int:
    net = _BUILDERS[args.network](args.seed)
    networks.save_weights(net, args.output)
    print(f"{net.name}: {net.parameter_count()} parameters -> {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    parser = argparse.ArgumentParser(prog="edge-inpaint", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("canny", parents=[parent], help="Canny edge map of an image")
    p.add_argument("image")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_canny)

    p = sub.add_parser("mask", parents=[parent], help="generate or augment masks")
    p.add_argument("--size", type=int, help="mask side (default image_size)")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--augment", metavar="MASK", help="write the 8 rotations/flips of MASK")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("infer", parents=[parent], help="inpaint one image")
    p.add_argument("image")
    p.add_argument("--mask", help="mask PNG (default: regular mask from config)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[parent], help="metrics CSV over a set of images")
    p.add_argument("images", nargs="+")
    p.add_argument("--report", default="-", help="CSV path, '-' for stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[parent], help="Canny sigma sweep")
    p.add_argument("images", nargs="+")
    p.add_argument("--sigmas", default="0,0.5,1,1.5,2,2.5,3,3.5,4,4.5,5,5.5")
    p.add_argument("--metrics", action="store_true", help="also run inference per sigma")
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("weights", help="weight archive tools")
    wsub = p.add_subparsers(dest="weights_command", required=True)
    q = wsub.add_parser("inspect", help="list tensors in an archive")
    q.add_argument("path")
    q.set_defaults(func=cmd_weights_inspect)
    q = wsub.add_parser("init", help="write a randomly initialized archive")
    q.add_argument("network", choices=sorted(_BUILDERS))
    q.add_argument("-o", "--output", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_weights_init)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeError, WeightMismatchError, WeightArchiveError) as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
