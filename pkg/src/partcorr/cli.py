"""Command-line entry point for the part-correspondence pipeline.

Subcommands: ``transfer`` (one support/target pair to a mask),
``evaluate`` (dataset metrics to CSV), ``ablate`` (variant comparison),
``skill`` (grasp/containment geometry from mask + depth), and
``inspect`` (dump file headers).  Settings come from built-in defaults,
then an optional ``key=value`` config file, then flags; later sources
win.  Bare defaults reproduce the reference configuration
(temperatures 0.2 / 0.02, ten clusters per side, full cyclic variant).

Exit codes: 0 success, 2 ingestion failure (missing or malformed
files), 3 pipeline failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .benchmark import (
    enumerate_pairs,
    load_index,
    run_ablation,
    run_tasks,
    write_ablation_csv,
)
from .crf import CrfConfig, refine
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    IngestionError,
    PartcorrError,
)
from .io import (
    AFDG_VERSION,
    RESOLUTION_GRID,
    BinaryMask,
    downsample_mask,
    read_depth_file,
    read_descriptor_file,
    read_mask_png,
    read_score_pfm,
    saliency_mask,
    upsample_map,
    write_mask_png,
    write_score_pfm,
)
from .matching import VARIANTS, MatcherConfig, match_pair
from .metrics import write_aggregate_csv, write_histogram_csv, write_report_csv
from .skills import skill_records, write_skill_jsonl

# Accepted config-file keys and their parsers.  Flags use the same names
# where they exist and always override the file.
_KEY_PARSERS = {
    "seed": int,
    "workers": int,
    "out_dir": str,
    "variant": str,
    "tau_qt": float,
    "tau_tr": float,
    "k_q": int,
    "k_t": int,
    "background_energy": float,
    "crf_iterations": int,
    "gaussian_sxy": float,
    "gaussian_w": float,
    "bilateral_sxy": float,
    "bilateral_srgb": float,
    "bilateral_w": float,
    "unary_scale": float,
    "crf_mode": str,
    "exact_max_pixels": int,
    "coverage_threshold": float,
    "sweep_stride": int,
    "histogram_bins": int,
}


@dataclasses.dataclass
class Settings:
    seed: int = 0
    workers: int | None = None
    out_dir: str = "."
    coverage_threshold: float = 0.5
    sweep_stride: int = 5
    histogram_bins: int = 20
    matcher: MatcherConfig = MatcherConfig()
    crf: CrfConfig = CrfConfig()


def load_config_file(path) -> dict:
    """Parse a key=value config file, rejecting unknown keys."""
    values = {}
    try:
        with open(path) as f:
            lines = f.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _KEY_PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def build_settings(args) -> Settings:
    """Merge defaults, config file, then flags into one Settings object."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    flag_map = {
        "variant": "variant",
        "tau_qt": "tau_qt",
        "tau_tr": "tau_tr",
        "kq": "k_q",
        "kt": "k_t",
        "crf_iters": "crf_iterations",
        "workers": "workers",
        "seed": "seed",
        "out_dir": "out_dir",
        "background_energy": "background_energy",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            values[key] = value
    try:
        matcher = MatcherConfig(
            tau_forward=values.get("tau_qt", 0.2),
            tau_backward=values.get("tau_tr", 0.02),
            k_query=values.get("k_q", 10),
            k_target=values.get("k_t", 10),
            variant=values.get("variant", "full"),
            background_energy_override=values.get("background_energy"),
        )
        crf = CrfConfig(
            iterations=values.get("crf_iterations", 10),
            gaussian_sxy=values.get("gaussian_sxy", 3.0),
            gaussian_w=values.get("gaussian_w", 3.0),
            bilateral_sxy=values.get("bilateral_sxy", 80.0),
            bilateral_srgb=values.get("bilateral_srgb", 13.0),
            bilateral_w=values.get("bilateral_w", 10.0),
            unary_scale=values.get("unary_scale", 1.0),
            mode=values.get("crf_mode", "auto"),
            exact_max_pixels=values.get("exact_max_pixels", 4096),
        )
    except PartcorrError as exc:
        raise ConfigError(str(exc)) from exc
    return Settings(
        seed=values.get("seed", 0),
        workers=values.get("workers"),
        out_dir=values.get("out_dir", "."),
        coverage_threshold=values.get("coverage_threshold", 0.5),
        sweep_stride=values.get("sweep_stride", 5),
        histogram_bins=values.get("histogram_bins", 20),
        matcher=matcher,
        crf=crf,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--variant", choices=VARIANTS)
    parser.add_argument("--tau-qt", type=float, dest="tau_qt")
    parser.add_argument("--tau-tr", type=float, dest="tau_tr")
    parser.add_argument("--kq", type=int)
    parser.add_argument("--kt", type=int)
    parser.add_argument("--crf-iters", type=int, dest="crf_iters")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--background-energy", type=float, dest="background_energy")
    parser.add_argument("--out-dir", dest="out_dir")


def build_parser() -> _Parser:
    parser = _Parser(prog="partcorr", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"partcorr {__version__} (descriptor format AFDG v{AFDG_VERSION})",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("transfer", help="transfer one query part to a target scene")
    p.add_argument("--support-image", help="recorded in the summary only")
    p.add_argument("--support-descriptors", required=True)
    p.add_argument("--query-mask", required=True)
    p.add_argument("--target-image", required=True)
    p.add_argument("--target-descriptors", required=True)
    p.add_argument("--target-mask")
    p.add_argument("--score-map", action="store_true", help="also write score_map.pfm")
    _add_common(p)

    p = sub.add_parser("evaluate", help="run a dataset and emit metric CSVs")
    p.add_argument("--index", required=True)
    p.add_argument("--mode", choices=("intra", "inter"), default="intra")
    _add_common(p)

    p = sub.add_parser("ablate", help="compare matcher variants on a dataset")
    p.add_argument("--index", required=True)
    p.add_argument("--mode", choices=("intra", "inter"), default="intra")
    _add_common(p)

    p = sub.add_parser("skill", help="compute grasp/containment geometry")
    p.add_argument("--mask", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--skill", choices=("grasp", "contain"), required=True)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--plane", help="support plane a,b,c,d (default: camera-down)")
    p.add_argument("--out", help="also write the records as JSON lines")

    p = sub.add_parser("inspect", help="print a file's header and statistics")
    p.add_argument("file")
    return parser


def _mask_for_grid(path, grid, coverage_threshold):
    """Accept a mask at either image or grid resolution."""
    mask = read_mask_png(path)
    if mask.bits.shape == (grid.height_patches, grid.width_patches):
        return BinaryMask(bits=mask.bits, resolution_tag=RESOLUTION_GRID)
    if (mask.height, mask.width) == tuple(grid.source_image_size):
        return downsample_mask(mask, grid, coverage_threshold)
    raise DimensionError(
        f"{path}: mask {mask.bits.shape} matches neither grid "
        f"{(grid.height_patches, grid.width_patches)} nor image "
        f"{tuple(grid.source_image_size)}"
    )


def cmd_transfer(args) -> int:
    settings = build_settings(args)
    os.makedirs(settings.out_dir, exist_ok=True)
    support = read_descriptor_file(args.support_descriptors)
    target = read_descriptor_file(args.target_descriptors)
    from PIL import Image

    with Image.open(args.target_image) as img:
        rgb = np.asarray(img.convert("RGB"))
    if rgb.shape[:2] != tuple(target.source_image_size):
        raise IngestionError(
            f"{args.target_image}: image size {rgb.shape[:2]} does not match "
            f"descriptor grid {tuple(target.source_image_size)}"
        )
    query_mask = _mask_for_grid(args.query_mask, support, settings.coverage_threshold)
    if args.target_mask:
        target_mask = _mask_for_grid(args.target_mask, target, settings.coverage_threshold)
    elif target.saliency is not None:
        target_mask = saliency_mask(target)
    else:
        target_mask = BinaryMask(
            bits=np.ones((target.height_patches, target.width_patches), dtype=bool),
            resolution_tag=RESOLUTION_GRID,
        )

    result, background_energy = match_pair(
        support, query_mask, target, target_mask,
        config=settings.matcher, seed=settings.seed,
    )
    score_img = upsample_map(
        result.score_map, tuple(target.source_image_size), target.stride
    )
    pred = refine(
        score_img, rgb, dataclasses.replace(settings.crf, background_energy=background_energy)
    )

    mask_path = os.path.join(settings.out_dir, "mask.png")
    write_mask_png(mask_path, pred)
    outputs = {"mask": mask_path}
    if args.score_map:
        pfm_path = os.path.join(settings.out_dir, "score_map.pfm")
        write_score_pfm(pfm_path, score_img)
        outputs["score_map"] = pfm_path
    summary = {
        "variant": settings.matcher.variant,
        "tau_qt": settings.matcher.tau_forward,
        "tau_tr": settings.matcher.tau_backward,
        "k_query": settings.matcher.k_query,
        "k_target": settings.matcher.k_target,
        "k_query_effective": int(result.forward_affinity.shape[0]),
        "k_target_effective": int(result.forward_affinity.shape[1]),
        "background_energy": background_energy,
        "seed": settings.seed,
        "support_image": args.support_image,
        "crf_iterations": settings.crf.iterations,
        "foreground_pixels": int(pred.count),
        "outputs": outputs,
    }
    summary_path = os.path.join(settings.out_dir, "summary.json")
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {mask_path} ({pred.count} foreground pixels)")
    return 0


def cmd_evaluate(args) -> int:
    settings = build_settings(args)
    os.makedirs(settings.out_dir, exist_ok=True)
    records = load_index(args.index)
    tasks = enumerate_pairs(records, args.mode)
    reports = run_tasks(
        tasks,
        settings.matcher,
        settings.crf,
        seed=settings.seed,
        workers=settings.workers,
        coverage_threshold=settings.coverage_threshold,
    )
    report_path = os.path.join(settings.out_dir, "report.csv")
    write_report_csv(report_path, reports)
    agg_path = os.path.join(settings.out_dir, "aggregate.csv")
    hist_path = os.path.join(settings.out_dir, "histograms.csv")
    if reports:
        write_aggregate_csv(agg_path, reports)
        write_histogram_csv(hist_path, reports, bins=settings.histogram_bins)
    else:
        for path, header in (
            (agg_path, "affordance,iou,fwb,pairs\n"),
            (hist_path, "affordance,bin_lo,bin_hi,count\n"),
        ):
            with open(path, "w") as f:
                f.write(header)
    print(f"evaluated {len(reports)} pairs -> {report_path}")
    return 0


def cmd_ablate(args) -> int:
    settings = build_settings(args)
    os.makedirs(settings.out_dir, exist_ok=True)
    records = load_index(args.index)
    rows, thresholds = run_ablation(
        records,
        settings.matcher,
        settings.crf,
        mode=args.mode,
        seed=settings.seed,
        workers=settings.workers,
        sweep_stride=settings.sweep_stride,
        coverage_threshold=settings.coverage_threshold,
    )
    csv_path = os.path.join(settings.out_dir, "ablation.csv")
    write_ablation_csv(csv_path, rows)
    with open(os.path.join(settings.out_dir, "thresholds.json"), "w") as f:
        json.dump(thresholds, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"ablation over {len(thresholds)} variants -> {csv_path}")
    return 0


def cmd_skill(args) -> int:
    mask = read_mask_png(args.mask)
    depth = read_depth_file(args.depth)
    plane = None
    if args.plane:
        parts = args.plane.split(",")
        if len(parts) != 4:
            raise ConfigError("--plane expects four comma-separated numbers")
        plane = tuple(float(p) for p in parts)
    records = skill_records(
        mask, depth, args.skill, connectivity=args.connectivity, support_plane=plane
    )
    for rec in records:
        print(json.dumps(rec))
    if args.out:
        write_skill_jsonl(args.out, records)
    return 0


def cmd_inspect(args) -> int:
    path = args.file
    with open(path, "rb") as f:
        head = f.read(4)
    if head == b"AFDG":
        grid = read_descriptor_file(path)
        print(f"kind=descriptor-grid format=AFDGv{AFDG_VERSION}")
        print(f"patches={grid.height_patches}x{grid.width_patches} dim={grid.dim}")
        print(f"patch_size={grid.patch_size} stride={grid.stride}")
        print(f"image={grid.source_image_size[0]}x{grid.source_image_size[1]}")
        print(
            f"descriptors min={grid.data.min():.6g} max={grid.data.max():.6g} "
            f"mean={grid.data.mean():.6g}"
        )
        if grid.saliency is not None:
            print(
                f"saliency min={grid.saliency.min():.6g} max={grid.saliency.max():.6g}"
            )
        else:
            print("saliency absent")
    elif head.startswith(b"\x89PNG"):
        mask = read_mask_png(path)
        print("kind=mask-png")
        print(f"size={mask.height}x{mask.width} foreground={mask.count}")
    elif head.startswith(b"Pf"):
        values = read_score_pfm(path)
        print("kind=score-pfm")
        print(
            f"size={values.shape[0]}x{values.shape[1]} "
            f"min={values.min():.6g} max={values.max():.6g}"
        )
    else:
        depth = read_depth_file(path)
        valid = depth.valid()
        print("kind=depth")
        print(f"size={depth.height}x{depth.width} valid={int(valid.sum())}")
        print(f"fx={depth.fx} fy={depth.fy} cx={depth.cx} cy={depth.cy}")
        if valid.any():
            vals = depth.values[valid]
            print(f"depth min={vals.min():.6g} max={vals.max():.6g} metres")
    return 0


_COMMANDS = {
    "transfer": cmd_transfer,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "skill": cmd_skill,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_help()
        return 0
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    if args.command is None:
        parser.print_help()
        return 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (IngestionError, FormatError, DataError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PartcorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
