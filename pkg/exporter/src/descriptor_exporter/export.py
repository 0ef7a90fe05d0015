"""Batch export of dense descriptor grids from images.

Images are resized (square ``load_size``, or native size cropped to a
patch multiple when ``load_size`` is 0), normalized with the standard
ImageNet statistics, and pushed through the backbone once; the requested
facet of the chosen block becomes the descriptor grid and the last
block's CLS attention becomes the saliency channel.  Inference runs in
eval mode with gradients off, so exporting the same image twice yields
byte-identical files.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image

from .afdg import write_afdg
from .vit import VisionTransformer, load_pretrained

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_LAYER = 11
DEFAULT_FACET = "keys"
DEFAULT_LOAD_SIZE = 224


@dataclass
class ExportJob:
    """One batch of images to turn into descriptor files."""

    inputs: list = field(default_factory=list)
    out_dir: str = "."
    layer: int = DEFAULT_LAYER
    facet: str = DEFAULT_FACET
    load_size: int = DEFAULT_LOAD_SIZE
    include_saliency: bool = True


def build_model(weights: str | None = None, random_init_seed: int | None = None) -> VisionTransformer:
    """Construct the S/8 backbone, optionally loading checkpoint weights.

    With ``random_init_seed`` the model is seeded deterministically and
    left untrained (format and integration testing).  Without either
    argument the caller is expected to fetch published weights first;
    loading failures surface as exceptions with the checkpoint path.
    """
    if random_init_seed is not None:
        torch.manual_seed(random_init_seed)
    model = VisionTransformer()
    if weights is not None:
        load_pretrained(model, weights)
    model.eval()
    return model


def prepare_image(path, load_size: int, patch_size: int) -> tuple[torch.Tensor, tuple[int, int]]:
    """Load, resize, and normalize one image; returns (tensor, (H, W))."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        if load_size > 0:
            rgb = rgb.resize((load_size, load_size), Image.BICUBIC)
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
    if load_size <= 0:
        h = (arr.shape[0] // patch_size) * patch_size
        w = (arr.shape[1] // patch_size) * patch_size
        if h == 0 or w == 0:
            raise ValueError(f"{path}: image smaller than one {patch_size}px patch")
        arr = arr[:h, :w]
    arr = (arr - IMAGENET_MEAN) / IMAGENET_STD
    tensor = torch.from_numpy(arr.astype(np.float32)).permute(2, 0, 1).unsqueeze(0)
    return tensor, (arr.shape[0], arr.shape[1])


def export_image(model: VisionTransformer, image_path, out_path, job: ExportJob) -> str:
    """Export one image to one AFDG file; returns the output path."""
    tensor, (h, w) = prepare_image(image_path, job.load_size, model.patch_size)
    hp, wp = h // model.patch_size, w // model.patch_size
    with torch.no_grad():
        features, cls_attention = model.extract(tensor, job.layer, job.facet)
    grid = features[0].reshape(hp, wp, -1).numpy().astype(np.float32)
    saliency = None
    if job.include_saliency:
        att = cls_attention[0].reshape(hp, wp).numpy().astype(np.float64)
        lo, hi = att.min(), att.max()
        if hi > lo:
            att = (att - lo) / (hi - lo)
        else:
            att = np.ones_like(att)
        saliency = np.clip(att, 0.0, 1.0).astype(np.float32)
    write_afdg(
        out_path,
        grid,
        patch_size=model.patch_size,
        stride=model.patch_size,
        image_size=(h, w),
        saliency=saliency,
    )
    return str(out_path)


def run_job(model: VisionTransformer, job: ExportJob) -> list[str]:
    os.makedirs(job.out_dir, exist_ok=True)
    written = []
    for image_path in job.inputs:
        stem = os.path.splitext(os.path.basename(image_path))[0]
        out_path = os.path.join(job.out_dir, f"{stem}.afdg")
        written.append(export_image(model, image_path, out_path, job))
    return written
