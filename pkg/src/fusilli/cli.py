"""Command-line front end: fuse pairs, score results, run whole corpora.

Four subcommands cover the pipeline end to end:

``fuse``
    Fuse one infrared/visible pair into an output image, optionally dumping
    intermediates (base parts, detail contents, per-tap weight maps).
``metrics``
    Score a fused image against its sources; one CSV row.
``batch``
    Fuse and score every pair in a manifest, writing per-pair images plus
    ``report.csv``, ``summary.csv`` and ``nabf_series.csv``.
``decompose``
    Split one image into its base part and detail content.

Conventions shared by all commands: weights come from ``--weights`` or the
``FUSILLI_WEIGHTS`` environment variable; pipeline settings come from a flat
``key=value`` config file with per-flag overrides; CSV output is
comma-separated with ``.`` decimals and LF line endings.  Exit status is 0
iff every requested artifact was produced.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import io as _io
from . import metrics as _metrics
from . import twoscale as _twoscale
from . import vggfeat as _vggfeat
from .fusion import FusionConfig, fuse_pair

__all__ = ["main", "run"]

WEIGHTS_ENV = "FUSILLI_WEIGHTS"
MANIFEST_HEADER = ("pair_id", "infrared", "visible")
REPORT_HEADER = ("pair_id", "fmi_dct", "fmi_w", "ssim_a", "nabf")
METRIC_KEYS = ("fmi_dct", "fmi_w", "ssim_a", "nabf")

CONFIG_KEYS = ("lambda", "r", "alpha1", "alpha2", "taps", "epsilon")

_PAIR_ID_RE = re.compile(r"[A-Za-z0-9._-]+\Z")


def read_config(path):
    """Parse a flat key=value config file into a string dict.

    Blank lines and ``#`` comments are ignored; later assignments win.
    Unknown keys are rejected so typos fail loudly.
    """
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _parse_taps(text):
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError:
        raise ValueError(f"taps must be comma-separated integers, got {text!r}") from None


def build_config(args):
    """Fold defaults, config file and CLI flags into a FusionConfig."""
    base = FusionConfig()
    lam, radius = base.lam, base.block_radius
    alpha1, alpha2 = base.alpha
    taps, epsilon = base.taps, base.epsilon
    config_path = getattr(args, "config", None)
    if config_path:
        values = read_config(config_path)
        if "lambda" in values:
            lam = float(values["lambda"])
        if "r" in values:
            radius = int(values["r"])
        if "alpha1" in values:
            alpha1 = float(values["alpha1"])
        if "alpha2" in values:
            alpha2 = float(values["alpha2"])
        if "taps" in values:
            taps = _parse_taps(values["taps"])
        if "epsilon" in values:
            epsilon = float(values["epsilon"])
    if getattr(args, "lam", None) is not None:
        lam = args.lam
    if getattr(args, "radius", None) is not None:
        radius = args.radius
    if getattr(args, "alpha1", None) is not None:
        alpha1 = args.alpha1
    if getattr(args, "alpha2", None) is not None:
        alpha2 = args.alpha2
    if getattr(args, "taps", None) is not None:
        taps = _parse_taps(args.taps)
    if getattr(args, "epsilon", None) is not None:
        epsilon = args.epsilon
    return FusionConfig(lam=lam, block_radius=radius, alpha=(alpha1, alpha2),
                        taps=taps, epsilon=epsilon)


def _resolve_weights(args):
    path = args.weights or os.environ.get(WEIGHTS_ENV)
    if not path:
        raise ValueError(f"no weight file: pass --weights or set {WEIGHTS_ENV}")
    return _vggfeat.load_backbone(path)


def read_manifest(path):
    """Load a pair manifest; image paths resolve relative to the manifest."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or tuple(cell.strip() for cell in rows[0]) != MANIFEST_HEADER:
        raise ValueError(f"{path}: expected header {','.join(MANIFEST_HEADER)!r}")
    root = Path(path).parent
    pairs, seen = [], set()
    for lineno, row in enumerate(rows[1:], 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        pair_id, infrared, visible = (cell.strip() for cell in row)
        if not _PAIR_ID_RE.match(pair_id):
            raise ValueError(
                f"{path}:{lineno}: pair_id {pair_id!r} must match [A-Za-z0-9._-]+")
        if pair_id in seen:
            raise ValueError(f"{path}:{lineno}: duplicate pair_id {pair_id!r}")
        seen.add(pair_id)
        pairs.append((pair_id, root / infrared, root / visible))
    if not pairs:
        raise ValueError(f"{path}: no pairs listed")
    missing = [str(p) for _, ir, vis in pairs for p in (ir, vis) if not p.is_file()]
    if missing:
        raise ValueError(f"{path}: missing image files: " + ", ".join(missing))
    return pairs


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _metric_row(pair_id, scores):
    return [pair_id] + [str(scores[key]) for key in METRIC_KEYS]


def cmd_fuse(args):
    config = build_config(args)
    backbone = _resolve_weights(args)
    infrared = _io.read_image(args.infrared)
    visible = _io.read_image(args.visible)
    intermediates = {} if args.dump_dir else None
    fused = fuse_pair(infrared, visible, backbone, config, intermediates=intermediates)
    _io.write_image(_io.quantize(fused), args.out)
    if args.dump_dir:
        dump = Path(args.dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        offset = {"detail_ir": 0.5, "detail_vis": 0.5, "fused_detail": 0.5}
        renames = {"base_1": "base_ir", "detail_1": "detail_ir",
                   "base_2": "base_vis", "detail_2": "detail_vis",
                   "fused_base": "fused_base", "fused_detail": "fused_detail"}
        for key, name in renames.items():
            image = intermediates[key] + offset.get(name, 0.0)
            _io.write_image(_io.quantize(image), dump / f"{name}.png")
        for tap in config.taps:
            w_ir, w_vis = intermediates[("weights", tap)]
            _io.write_image(_io.quantize(w_ir), dump / f"weights_tap{tap}_ir.png")
            _io.write_image(_io.quantize(w_vis), dump / f"weights_tap{tap}_vis.png")
    return 0


def cmd_metrics(args):
    fused = _io.read_image(args.fused)
    infrared = _io.read_image(args.infrared)
    visible = _io.read_image(args.visible)
    pair_id = args.pair_id or Path(args.fused).stem
    scores = _metrics.evaluate_pair(fused, infrared, visible)
    row = _metric_row(pair_id, scores)
    if args.out:
        _write_csv(args.out, REPORT_HEADER, [row])
    else:
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        writer.writerow(row)
    return 0


def cmd_batch(args):
    config = build_config(args)
    backbone = _resolve_weights(args)
    pairs = read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(pair):
        pair_id, ir_path, vis_path = pair
        infrared = _io.read_image(ir_path)
        visible = _io.read_image(vis_path)
        fused = _io.quantize(fuse_pair(infrared, visible, backbone, config))
        _io.write_image(fused, out_dir / f"{pair_id}.png")
        return _metrics.evaluate_pair(fused / 255.0, infrared, visible)

    workers = args.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(process, pair) for pair in pairs]
        outcomes = []
        for pair, future in zip(pairs, futures):
            try:
                outcomes.append((pair[0], future.result(), None))
            except (OSError, ValueError) as exc:
                outcomes.append((pair[0], None, str(exc)))

    report_rows, series_rows, failures = [], [], []
    sums = dict.fromkeys(METRIC_KEYS, 0.0)
    for pair_id, scores, error in outcomes:
        if error is not None:
            print(f"error: pair {pair_id}: {error}", file=sys.stderr)
            failures.append([pair_id, error])
            continue
        report_rows.append(_metric_row(pair_id, scores))
        series_rows.append([pair_id, str(scores["nabf"])])
        for key in METRIC_KEYS:
            sums[key] += scores[key]
    fused_count = len(report_rows)
    summary_rows = []
    if fused_count:
        summary_rows.append([str(sums[key] / fused_count) for key in METRIC_KEYS])
    _write_csv(out_dir / "report.csv", REPORT_HEADER, report_rows)
    _write_csv(out_dir / "summary.csv", METRIC_KEYS, summary_rows)
    _write_csv(out_dir / "nabf_series.csv", ("pair_id", "nabf"), series_rows)
    if failures:
        _write_csv(out_dir / "failures.csv", ("pair_id", "error"), failures)
        return 1
    return 0


def cmd_decompose(args):
    image = _io.read_image(args.image)
    lam = args.lam if args.lam is not None else _twoscale.DEFAULT_LAMBDA
    base, detail = _twoscale.decompose(image, lam)
    _io.write_image(_io.quantize(base), args.out_base)
    # detail content is signed; shift to mid-gray for 8-bit viewing
    _io.write_image(_io.quantize(detail + 0.5), args.out_detail)
    return 0


def _add_pipeline_flags(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="base/detail regularization weight")
    parser.add_argument("--radius", type=int, default=None,
                        help="activity block-average radius")
    parser.add_argument("--alpha1", type=float, default=None,
                        help="base weight for the infrared image")
    parser.add_argument("--alpha2", type=float, default=None,
                        help="base weight for the visible image")
    parser.add_argument("--taps", default=None,
                        help="comma-separated feature taps, e.g. 1,2,3,4")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="soft-max degeneracy guard")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fusilli",
        description="Infrared/visible image fusion through two-scale "
                    "decomposition and deep-feature detail weighting.")
    commands = parser.add_subparsers(dest="command", required=True)

    fuse = commands.add_parser("fuse", help="fuse one infrared/visible pair")
    fuse.add_argument("infrared")
    fuse.add_argument("visible")
    fuse.add_argument("--out", required=True, help="fused output image (.png or .pgm)")
    fuse.add_argument("--weights", help=f"VGWF weight file (default ${WEIGHTS_ENV})")
    fuse.add_argument("--dump-dir", help="directory for intermediate images")
    _add_pipeline_flags(fuse)
    fuse.set_defaults(func=cmd_fuse)

    metrics = commands.add_parser("metrics", help="score a fused image")
    metrics.add_argument("fused")
    metrics.add_argument("infrared")
    metrics.add_argument("visible")
    metrics.add_argument("--out", help="CSV report path (default: stdout)")
    metrics.add_argument("--pair-id", help="row label (default: fused file stem)")
    metrics.set_defaults(func=cmd_metrics)

    batch = commands.add_parser("batch", help="fuse and score a whole manifest")
    batch.add_argument("manifest", help="CSV with header pair_id,infrared,visible")
    batch.add_argument("--out-dir", required=True)
    batch.add_argument("--weights", help=f"VGWF weight file (default ${WEIGHTS_ENV})")
    batch.add_argument("--workers", type=int, default=None,
                       help="worker threads (default: available cores)")
    _add_pipeline_flags(batch)
    batch.set_defaults(func=cmd_batch)

    decompose = commands.add_parser("decompose", help="split one image into base and detail")
    decompose.add_argument("image")
    decompose.add_argument("--out-base", required=True)
    decompose.add_argument("--out-detail", required=True)
    decompose.add_argument("--lambda", dest="lam", type=float, default=None,
                           help="regularization weight")
    decompose.set_defaults(func=cmd_decompose)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, _vggfeat.WeightFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run():
    raise SystemExit(main())
