"""CLI: export dense ViT descriptor grids as AFDG files.

    export-descriptors --in "images/*.png" --out-dir descriptors/ \
        --layer 11 --facet keys --load-size 224 --saliency \
        --weights dino_vits8.pth

Without ``--weights`` the tool tries to fetch the published small/patch-8
self-distilled checkpoint via torch.hub; ``--random-init`` skips weights
entirely (deterministic untrained backbone, useful for format tests).
"""

from __future__ import annotations

import argparse
import glob
import sys

from .export import (
    DEFAULT_FACET,
    DEFAULT_LAYER,
    DEFAULT_LOAD_SIZE,
    ExportJob,
    build_model,
    run_job,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="export-descriptors", description=__doc__)
    parser.add_argument("--in", dest="inputs", required=True,
                        help="input image path or glob")
    parser.add_argument("--out-dir", default=".", help="output directory")
    parser.add_argument("--layer", type=int, default=DEFAULT_LAYER,
                        help="transformer block to tap (0-based)")
    parser.add_argument("--facet", default=DEFAULT_FACET,
                        choices=("keys", "queries", "values", "tokens"))
    parser.add_argument("--load-size", type=int, default=DEFAULT_LOAD_SIZE,
                        help="square resize; 0 keeps the native size "
                             "cropped to a patch multiple")
    parser.add_argument("--saliency", action="store_true",
                        help="append the CLS-attention saliency channel")
    parser.add_argument("--weights", help="checkpoint path for the backbone")
    parser.add_argument("--random-init", action="store_true",
                        help="use a deterministic untrained backbone")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for --random-init")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    paths = sorted(glob.glob(args.inputs))
    if not paths:
        print(f"error: no inputs match {args.inputs!r}", file=sys.stderr)
        return 1
    try:
        if args.random_init:
            model = build_model(random_init_seed=args.seed)
        elif args.weights:
            model = build_model(weights=args.weights)
        else:
            import torch

            print("fetching published weights via torch.hub ...", file=sys.stderr)
            hub_model = torch.hub.load("facebookresearch/dino:main", "dino_vits8")
            model = build_model(random_init_seed=0)
            model.load_state_dict(hub_model.state_dict(), strict=True)
            model.eval()
    except Exception as exc:
        print(f"error: could not prepare the backbone: {exc}", file=sys.stderr)
        print("hint: pass --weights <checkpoint> or --random-init", file=sys.stderr)
        return 1

    job = ExportJob(
        inputs=paths,
        out_dir=args.out_dir,
        layer=args.layer,
        facet=args.facet,
        load_size=args.load_size,
        include_saliency=args.saliency,
    )
    try:
        written = run_job(model, job)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
