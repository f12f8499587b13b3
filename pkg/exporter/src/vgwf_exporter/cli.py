"""Command-line wrapper: ``vgwf-export checkpoint.pth out_dir/``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exporter import ExportError, export, export_weights

__all__ = ["main", "run"]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vgwf-export",
        description="Convert a standard VGG-19 checkpoint into a VGWF weight "
                    "file with checksum manifest and golden activation fixtures.")
    parser.add_argument("checkpoint", help="path to a VGG-19 state-dict checkpoint (.pth)")
    parser.add_argument("out_dir", help="output directory")
    parser.add_argument("--weights-name", default="vgg19_prefix.vgwf",
                        help="weight file name inside out_dir")
    parser.add_argument("--no-fixtures", action="store_true",
                        help="export weights and checksums only")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.no_fixtures:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            manifest = export_weights(args.checkpoint, out_dir / args.weights_name)
        else:
            manifest = export(args.checkpoint, args.out_dir, weight_name=args.weights_name)
    except (OSError, ExportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest.weight_path} ({len(manifest.checksums)} layers, "
          f"{len(manifest.activations)} fixture tensors)")
    return 0


def run():
    raise SystemExit(main())
