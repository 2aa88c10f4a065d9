"""Command-line entry point.

Subcommands: synth, stream, analyze, geometry, meanshapes, scatter,
distmetrics, plan, bench. Exit codes: 0 success, 1 usage error, 2 data
error. The LABELGEN_SEED environment variable overrides the default seed 0;
an explicit --seed flag wins over both.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import benchmark, distmetrics, fusion, geometry, pipeline
from .formats import (
    DatasetManifest,
    FormatError,
    read_manifest,
    read_mask,
    read_embeddings,
    read_taxonomy,
    write_polygons,
)
from .sampling import FilterConfig


@dataclass(frozen=True)
class AnalysisReport:
    """Dataset statistics row: sizes, area ratios, shape metrics, optional
    distribution distances (None renders as "-")."""

    name: str
    size: int
    instances_per_image: float
    mask_image_ratio: float
    bbox_image_ratio: float
    mask_bbox_ratio: float
    mask_image_ratio_pooled: float
    bbox_image_ratio_pooled: float
    mask_bbox_ratio_pooled: float
    polygon_length: float | None
    polygon_points: float | None
    shape_diversity: float | None
    image_fid: float | None = None
    image_kid: float | None = None
    label_fid: float | None = None
    label_kid: float | None = None

    def machine_lines(self) -> list[str]:
        pairs = [
            ("dataset", self.name),
            ("size", self.size),
            ("instances_per_image", self.instances_per_image),
            ("mask_image_ratio", self.mask_image_ratio),
            ("bbox_image_ratio", self.bbox_image_ratio),
            ("mask_bbox_ratio", self.mask_bbox_ratio),
            ("mask_image_ratio_pooled", self.mask_image_ratio_pooled),
            ("bbox_image_ratio_pooled", self.bbox_image_ratio_pooled),
            ("mask_bbox_ratio_pooled", self.mask_bbox_ratio_pooled),
            ("polygon_length", self.polygon_length),
            ("polygon_points", self.polygon_points),
            ("shape_diversity", self.shape_diversity),
            ("image_fid", self.image_fid),
            ("image_kid", self.image_kid),
            ("label_fid", self.label_fid),
            ("label_kid", self.label_kid),
        ]
        return [f"{key}\t{_fmt(value)}" for key, value in pairs]

    def format_table(self) -> str:
        headers = ["dataset", "size", "inst", "mask/img", "bbox/img", "mask/bbox",
                   "img-fid", "img-kid", "lbl-fid", "lbl-kid", "perim", "points", "div"]
        row = [self.name, str(self.size), _fmt(self.instances_per_image),
               _fmt(self.mask_image_ratio), _fmt(self.bbox_image_ratio),
               _fmt(self.mask_bbox_ratio), _fmt(self.image_fid), _fmt(self.image_kid),
               _fmt(self.label_fid), _fmt(self.label_kid), _fmt(self.polygon_length),
               _fmt(self.polygon_points), _fmt(self.shape_diversity)]
        widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
        head = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
        body = "  ".join(v.ljust(w) for v, w in zip(row, widths))
        return head + "\n" + body


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _load_masks(manifest: DatasetManifest, base_dir: Path):
    for entry in manifest.entries:
        yield entry, read_mask(base_dir / entry.mask_path)


def analyze_manifest(manifest: DatasetManifest, base_dir,
                     min_pixels: int = 100, epsilon: float = 0.01) -> AnalysisReport:
    """Aggregate per-mask statistics and polygon metrics over a dataset."""
    if not manifest.entries:
        raise ValueError("empty dataset")
    base_dir = Path(base_dir)
    instance_counts = []
    mi, bi, mb = [], [], []
    fg_total = bbox_total = pixel_total = 0
    polys_by_class: dict[int, list] = {}
    for entry, mask in _load_masks(manifest, base_dir):
        stats = geometry.mask_stats(mask)
        instance_counts.append(stats.instance_count)
        if stats.instance_count > 0:
            mi.append(stats.mask_over_image)
            bi.append(stats.bbox_over_image)
            mb.append(stats.mask_over_bbox)
        pixels = mask.width * mask.height
        pixel_total += pixels
        fg_total += round(stats.mask_over_image * pixels)
        bbox_total += round(stats.bbox_over_image * pixels)
        poly = geometry.largest_component_polygon(mask, min_pixels=min_pixels)
        if poly is not None:
            simplified = geometry.simplify_dp(poly, epsilon)
            if not simplified.degenerate:
                polys_by_class.setdefault(entry.class_id, []).append(simplified)
    flat = [p for polys in polys_by_class.values() for p in polys]
    if flat:
        report = geometry.geometry_report(polys_by_class)
        pl, sc, sd = report.polygon_length, report.shape_complexity, report.shape_diversity
    else:
        pl = sc = sd = None
    return AnalysisReport(
        name=manifest.name,
        size=len(manifest.entries),
        instances_per_image=float(np.mean(instance_counts)),
        mask_image_ratio=float(np.mean(mi)) if mi else 0.0,
        bbox_image_ratio=float(np.mean(bi)) if bi else 0.0,
        mask_bbox_ratio=float(np.mean(mb)) if mb else 0.0,
        mask_image_ratio_pooled=fg_total / pixel_total,
        bbox_image_ratio_pooled=bbox_total / pixel_total,
        mask_bbox_ratio_pooled=fg_total / bbox_total if bbox_total else 0.0,
        polygon_length=pl,
        polygon_points=sc,
        shape_diversity=sd,
    )


def emit_scatter(manifest: DatasetManifest, base_dir, out_path) -> int:
    """Write one normalized 'cx<TAB>cy' line per nonempty mask; returns line count."""
    lines = []
    for _, mask in _load_masks(manifest, Path(base_dir)):
        centers = geometry.center_scatter([mask])
        for cx, cy in centers:
            lines.append(f"{cx:.6f}\t{cy:.6f}")
    Path(out_path).write_text("\n".join(lines) + ("\n" if lines else ""))
    return len(lines)


# --------------------------------------------------------------------------
# subcommand handlers
# --------------------------------------------------------------------------

def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("LABELGEN_SEED")
    return int(env) if env else 0


def _filters_from(args) -> FilterConfig:
    base = FilterConfig.from_file(args.config) if getattr(args, "config", None) else FilterConfig()
    return base.override(
        truncation_psi=getattr(args, "truncation", None),
        rejection_rate=getattr(args, "rejection", None),
        nucleus_p=getattr(args, "nucleus_p", None),
        top_k=getattr(args, "top_k", None),
        uncertainty_fraction=getattr(args, "uncertainty", None),
    )


def _cmd_synth(args) -> int:
    spec = pipeline.PipelineSpec(
        source=args.source,
        filters=_filters_from(args),
        mode="offline",
        n=args.n,
        out_dir=Path(args.out),
        seed=_resolve_seed(args),
        resolution=args.res,
        num_classes=args.classes,
        name=args.name,
    )
    manifest = pipeline.synth_offline(spec)
    print(f"wrote {len(manifest)} samples to {args.out}")
    return 0


def _cmd_stream(args) -> int:
    spec = pipeline.PipelineSpec(
        source=args.source,
        filters=_filters_from(args).override(uncertainty_fraction=0.0),
        mode="online",
        out_dir=Path(args.out),
        seed=_resolve_seed(args),
        resolution=args.res,
        num_classes=args.classes,
        name=args.name,
    )
    manifest = pipeline.write_stream(spec, args.count)
    print(f"streamed {len(manifest)} samples to {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    manifest = read_manifest(args.manifest)
    report = analyze_manifest(
        manifest, Path(args.manifest).parent, min_pixels=args.min_pixels, epsilon=args.epsilon
    )
    print(report.format_table())
    print()
    for line in report.machine_lines():
        print(line)
    return 0


def _cmd_geometry(args) -> int:
    manifest = read_manifest(args.manifest)
    base_dir = Path(args.manifest).parent
    polys: dict[int, list] = {}
    for entry, mask in _load_masks(manifest, base_dir):
        poly = geometry.largest_component_polygon(mask, min_pixels=args.min_pixels)
        if poly is None:
            continue
        simplified = geometry.simplify_dp(poly, args.epsilon)
        if not simplified.degenerate:
            polys.setdefault(entry.class_id, []).append(simplified.points)
    write_polygons(polys, args.out)
    total = sum(len(v) for v in polys.values())
    print(f"wrote {total} polygons to {args.out}")
    return 0


def _cmd_meanshapes(args) -> int:
    manifest = read_manifest(args.manifest)
    base_dir = Path(args.manifest).parent
    by_class: dict[int, list] = {}
    for entry, mask in _load_masks(manifest, base_dir):
        if mask.foreground().any():
            by_class.setdefault(entry.class_id, []).append(mask)
    lines = []
    skipped = []
    for cid in sorted(by_class):
        masks = by_class[cid]
        if len(masks) < args.k:
            skipped.append(cid)
            continue
        shapes = geometry.mean_shapes(masks, k=args.k, seed=_resolve_seed(args), class_id=cid)
        for cluster in range(args.k):
            values = " ".join(f"{v:.6f}" for v in shapes.shapes[cluster].ravel())
            lines.append(f"{cid}\t{cluster}\t{int(shapes.cluster_sizes[cluster])}\t{values}")
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""))
    if skipped:
        print(f"skipped classes with fewer than k={args.k} masks: {skipped}", file=sys.stderr)
    print(f"wrote {len(lines)} mean-shape rows to {args.out}")
    return 0


def _cmd_scatter(args) -> int:
    manifest = read_manifest(args.manifest)
    count = emit_scatter(manifest, Path(args.manifest).parent, args.out)
    print(f"wrote {count} centers to {args.out}")
    return 0


def _cmd_distmetrics(args) -> int:
    a = read_embeddings(args.a)
    b = read_embeddings(args.b)
    fid_value = distmetrics.fid(a, b)
    kid_value = distmetrics.kid(a, b, block_size=args.block_size)
    print(f"fid\t{fid_value:.6f}")
    print(f"kid\t{kid_value:.8f}")
    print(f"kid_x1000\t{kid_value * 1000:.6f}")
    return 0


def _cmd_plan(args) -> int:
    layers = fusion.read_layers(args.layers)
    report = fusion.compare(layers, d_reduce=args.d_reduce, final_res=args.final_res)
    print(report.format_table())
    return 0


def _label_name(task, taxonomy, label: int) -> str:
    if label == 0:
        return "background"
    members = [cid for cid, l in task.class_map.items() if l == label]
    if len(members) == 1 and taxonomy is not None:
        return taxonomy.classes.get(members[0], f"label_{label}")
    if task.num_task_labels == 1:
        return "foreground"
    return f"group_{label}"


def _cmd_bench(args) -> int:
    pred_manifest = read_manifest(args.pred_manifest)
    gt_manifest = read_manifest(args.gt_manifest)
    taxonomy = read_taxonomy(args.taxonomy) if args.taxonomy else None
    if taxonomy is not None:
        task = benchmark.build_task(taxonomy, args.task)
    elif args.task in ("FG/BG", "fgbg"):
        ids = sorted({e.class_id for e in gt_manifest.entries})
        task = benchmark.TaskSpec(
            name=args.task, class_map={cid: 1 for cid in ids},
            num_task_labels=1, include_background=True,
        )
    else:
        raise ValueError(f"task {args.task!r} needs --taxonomy")
    preds = {e.id: e for e in pred_manifest.entries}
    pred_dir = Path(args.pred_manifest).parent
    gt_dir = Path(args.gt_manifest).parent
    cm = benchmark.ConfusionMatrix.for_task(task)
    matched = 0
    for entry in gt_manifest.entries:
        pred_entry = preds.get(entry.id)
        if pred_entry is None:
            continue
        pred_mask = read_mask(pred_dir / pred_entry.mask_path)
        gt_mask = read_mask(gt_dir / entry.mask_path)
        benchmark.accumulate(cm, pred_mask, gt_mask, task)
        matched += 1
    if matched == 0:
        raise ValueError("no prediction ids matched the ground-truth manifest")
    result = benchmark.miou(cm)
    lines = []
    for label in sorted(result.per_class):
        name = _label_name(task, taxonomy, label)
        lines.append(f"{label}\t{name}\t{result.per_class[label]:.6f}")
    lines.append(f"mIoU\t{result.mean:.6f}")
    n = min(5, len(result.per_class))
    ranks = benchmark.rank_classes(result.per_class, n=n)
    lines.append("top-5 best")
    for label, iou in ranks.best:
        lines.append(f"  {label}\t{_label_name(task, taxonomy, label)}\t{iou:.6f}")
    lines.append("top-5 worst")
    for label, iou in ranks.worst:
        lines.append(f"  {label}\t{_label_name(task, taxonomy, label)}\t{iou:.6f}")
    text = "\n".join(lines) + "\n"
    Path(args.report).write_text(text)
    print(text, end="")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_seed(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $LABELGEN_SEED or 0)")


def _add_source_args(parser):
    parser.add_argument("--source", default="toy", help="sample source id")
    parser.add_argument("--res", type=int, default=64, help="sample resolution")
    parser.add_argument("--classes", type=int, default=16, help="number of classes")
    parser.add_argument("--name", default="dataset", help="dataset name")
    parser.add_argument("--config", default=None, help="key=value filter config file")
    parser.add_argument("--truncation", type=float, default=None,
                        help="latent truncation (default 0.9)")
    parser.add_argument("--rejection", type=float, default=None,
                        help="confidence rejection rate (default 0.9)")
    parser.add_argument("--nucleus-p", type=float, default=None,
                        help="nucleus sampling mass (default 0.92)")
    parser.add_argument("--top-k", type=int, default=None,
                        help="top-k token truncation (default 200)")
    _add_seed(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="labelgen", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth",
                       help="synthesize an offline labeled dataset")
    _add_source_args(p)
    p.add_argument("--n", type=int, required=True, help="samples to keep")
    p.add_argument("--uncertainty", type=float, default=None,
                   help="ensemble uncertainty drop fraction (default 0.10)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("stream",
                       help="materialize samples from the online stream")
    _add_source_args(p)
    p.add_argument("--count", type=int, required=True, help="samples to pull")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_stream)

    p = sub.add_parser("analyze",
                       help="dataset statistics and shape metrics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--min-pixels", type=int, default=100,
                   help="smallest component used for polygon metrics (default 100)")
    p.add_argument("--epsilon", type=float, default=0.01,
                   help="polygon simplification tolerance (default 0.01)")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("geometry",
                       help="extract simplified normalized polygons")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-pixels", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.01,
                   help="polygon simplification tolerance (default 0.01)")
    p.set_defaults(handler=_cmd_geometry)

    p = sub.add_parser("meanshapes",
                       help="k-means mean shapes per class")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5, help="clusters per class (default 5)")
    _add_seed(p)
    p.set_defaults(handler=_cmd_meanshapes)

    p = sub.add_parser("scatter",
                       help="normalized bbox-center scatter data")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_scatter)

    p = sub.add_parser("distmetrics",
                       help="FID/KID between two embedding files")
    p.add_argument("--a", required=True, help="first EMB1 file")
    p.add_argument("--b", required=True, help="second EMB1 file")
    p.add_argument("--block-size", type=int, default=None,
                   help="average the KID estimator over blocks of this size")
    p.set_defaults(handler=_cmd_distmetrics)

    p = sub.add_parser("plan",
                       help="grouped-fusion memory plan vs resize-all baseline")
    p.add_argument("--layers", required=True, help="name<TAB>res<TAB>channels file")
    p.add_argument("--d-reduce", type=int, default=128,
                   help="1x1 reduction width (default 128)")
    p.add_argument("--final-res", type=int, default=512)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("bench",
                       help="mIoU benchmark over prediction/ground-truth manifests")
    p.add_argument("--task", required=True, help="task name, e.g. FG/BG")
    p.add_argument("--pred-manifest", required=True)
    p.add_argument("--gt-manifest", required=True)
    p.add_argument("--report", required=True, help="output report file")
    p.add_argument("--taxonomy", default=None, help="taxonomy file with group tables")
    p.set_defaults(handler=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "handler"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.handler(args)
    except FormatError as exc:
        print(f"labelgen: data error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"labelgen: data error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
