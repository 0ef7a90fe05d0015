"""Dataset ingestion, pair enumeration, and benchmark orchestration.

A dataset is a line-oriented index file naming one object per line::

    # object_id  class_name  directory  affordances
    mug_01  mug  objects/mug_01  grasp,contain

``directory`` is relative to the index file and must contain
``image.png``, ``descriptors.afdg``, and ``masks/<affordance>.png`` for
every listed affordance.  An optional ``mask.png`` supplies an explicit
target foreground mask; otherwise the descriptor file's saliency channel
(thresholded at 0.5) is used, and failing that the whole image.

Evaluation enumerates ordered support/target pairs (never self-pairs):
intra-class pairs share a class, inter-class pairs differ in class but
share the task affordance.  Task execution is embarrassingly parallel;
per-task RNG seeds derive from the pair identity so results do not
depend on scheduling, and reports are sorted before writing so repeated
runs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .crf import CrfConfig, refine
from .errors import IngestionError, PartcorrError
from .io import (
    RESOLUTION_GRID,
    BinaryMask,
    DescriptorGrid,
    downsample_mask,
    read_descriptor_file,
    read_mask_png,
    saliency_mask,
    upsample_map,
)
from .matching import VARIANT_FULL, VARIANTS, MatcherConfig, match_pair, sweep_grid
from .metrics import MetricReport, aggregate, iou, weighted_fbeta

MODE_INTRA = "intra"
MODE_INTER = "inter"


@dataclass(frozen=True)
class ObjectRecord:
    """One annotated dataset object with its on-disk layout."""

    object_id: str
    class_name: str
    directory: str
    affordances: tuple[str, ...]

    @property
    def image_path(self) -> str:
        return os.path.join(self.directory, "image.png")

    @property
    def descriptor_path(self) -> str:
        return os.path.join(self.directory, "descriptors.afdg")

    @property
    def explicit_mask_path(self) -> str:
        return os.path.join(self.directory, "mask.png")

    def mask_path(self, affordance: str) -> str:
        return os.path.join(self.directory, "masks", f"{affordance}.png")


@dataclass(frozen=True)
class PairTask:
    support: ObjectRecord
    target: ObjectRecord
    affordance: str
    mode: str

    @property
    def pair_id(self) -> str:
        return f"{self.support.object_id}__{self.target.object_id}__{self.affordance}"


def load_index(path) -> list[ObjectRecord]:
    """Parse an index file into object records (no payload validation yet)."""
    if not os.path.isfile(path):
        raise IngestionError(f"index file not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    records = []
    seen = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise IngestionError(
                    f"{path}:{lineno}: expected 4 columns "
                    "(object_id class_name directory affordances)"
                )
            object_id, class_name, rel_dir, aff_str = parts
            if object_id in seen:
                raise IngestionError(f"{path}:{lineno}: duplicate object id {object_id}")
            seen.add(object_id)
            affordances = tuple(a for a in aff_str.split(",") if a)
            if not affordances:
                raise IngestionError(f"{path}:{lineno}: object lists no affordances")
            records.append(
                ObjectRecord(
                    object_id=object_id,
                    class_name=class_name,
                    directory=os.path.join(base, rel_dir),
                    affordances=affordances,
                )
            )
    return sorted(records, key=lambda r: r.object_id)


def enumerate_pairs(records: list[ObjectRecord], mode: str) -> list[PairTask]:
    """All ordered support/target tasks for the requested pairing mode."""
    if mode not in (MODE_INTRA, MODE_INTER):
        raise IngestionError(f"unknown pairing mode {mode!r}")
    tasks = []
    for support in records:
        for target in records:
            if support.object_id == target.object_id:
                continue
            same_class = support.class_name == target.class_name
            if (mode == MODE_INTRA) != same_class:
                continue
            shared = sorted(set(support.affordances) & set(target.affordances))
            for affordance in shared:
                tasks.append(
                    PairTask(support=support, target=target, affordance=affordance, mode=mode)
                )
    return sorted(tasks, key=lambda t: (t.support.object_id, t.target.object_id, t.affordance))


class GridCache:
    """Thread-safe read-only cache of loaded descriptor grids and images."""

    def __init__(self):
        self._lock = threading.Lock()
        self._grids: dict[str, DescriptorGrid] = {}
        self._images: dict[str, np.ndarray] = {}

    def grid(self, path: str) -> DescriptorGrid:
        with self._lock:
            if path not in self._grids:
                self._grids[path] = read_descriptor_file(path)
            return self._grids[path]

    def image(self, path: str) -> np.ndarray:
        with self._lock:
            if path not in self._images:
                with Image.open(path) as img:
                    arr = np.asarray(img.convert("RGB"))
                arr.flags.writeable = False
                self._images[path] = arr
            return self._images[path]


def task_seed(base_seed: int, pair_id: str) -> int:
    """Stable per-task seed, independent of execution order."""
    digest = hashlib.sha256(f"{base_seed}|{pair_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _grid_mask_from_image_mask(
    mask: BinaryMask, grid: DescriptorGrid, coverage_threshold: float
) -> BinaryMask:
    """Downsample, relaxing to any-coverage when majority coverage empties it."""
    down = downsample_mask(mask, grid, coverage_threshold)
    if down.is_empty():
        down = downsample_mask(mask, grid, coverage_threshold=1e-9)
    return down


def _load_pair_inputs(
    task: PairTask, cache: GridCache, coverage_threshold: float
) -> tuple[DescriptorGrid, BinaryMask, DescriptorGrid, BinaryMask, np.ndarray, BinaryMask]:
    try:
        support_grid = cache.grid(task.support.descriptor_path)
        target_grid = cache.grid(task.target.descriptor_path)
        rgb = cache.image(task.target.image_path)
        support_gt = read_mask_png(task.support.mask_path(task.affordance))
        target_gt = read_mask_png(task.target.mask_path(task.affordance))
        explicit = None
        if os.path.isfile(task.target.explicit_mask_path):
            explicit = read_mask_png(task.target.explicit_mask_path)
    except (OSError, PartcorrError) as exc:
        raise IngestionError(f"{task.pair_id}: {exc}") from exc

    if support_gt.is_empty() or target_gt.is_empty():
        raise IngestionError(
            f"{task.pair_id}: ground-truth mask for {task.affordance!r} is empty"
        )
    if (support_gt.height, support_gt.width) != tuple(support_grid.source_image_size):
        raise IngestionError(
            f"{task.pair_id}: support mask does not match descriptor image size"
        )
    if rgb.shape[:2] != tuple(target_grid.source_image_size):
        raise IngestionError(
            f"{task.pair_id}: target image does not match descriptor image size"
        )

    query_mask = _grid_mask_from_image_mask(support_gt, support_grid, coverage_threshold)
    if explicit is not None:
        target_mask = _grid_mask_from_image_mask(explicit, target_grid, coverage_threshold)
    elif target_grid.saliency is not None:
        target_mask = saliency_mask(target_grid)
    else:
        target_mask = BinaryMask(
            bits=np.ones((target_grid.height_patches, target_grid.width_patches), dtype=bool),
            resolution_tag=RESOLUTION_GRID,
        )
    if target_mask.is_empty():
        target_mask = BinaryMask(
            bits=np.ones((target_grid.height_patches, target_grid.width_patches), dtype=bool),
            resolution_tag=RESOLUTION_GRID,
        )
    return support_grid, query_mask, target_grid, target_mask, rgb, target_gt


def _score_pair(
    task: PairTask,
    matcher_config: MatcherConfig,
    seed: int,
    cache: GridCache,
    coverage_threshold: float,
) -> tuple[np.ndarray, float, np.ndarray, BinaryMask]:
    """Match one pair; returns (image-res score map, bg energy, rgb, gt)."""
    inputs = _load_pair_inputs(task, cache, coverage_threshold)
    support_grid, query_mask, target_grid, target_mask, rgb, target_gt = inputs
    try:
        result, background_energy = match_pair(
            support_grid,
            query_mask,
            target_grid,
            target_mask,
            config=matcher_config,
            seed=task_seed(seed, task.pair_id),
        )
    except PartcorrError as exc:
        raise type(exc)(f"{task.pair_id}: {exc}") from exc
    score_img = upsample_map(
        result.score_map, tuple(target_grid.source_image_size), target_grid.stride
    )
    return score_img, background_energy, rgb, target_gt


def run_pair(
    task: PairTask,
    matcher_config: MatcherConfig = MatcherConfig(),
    crf_config: CrfConfig = CrfConfig(),
    seed: int = 0,
    cache: GridCache | None = None,
    coverage_threshold: float = 0.5,
) -> MetricReport:
    """Full pipeline for one task: load, match, refine, score."""
    cache = cache or GridCache()
    score_img, background_energy, rgb, target_gt = _score_pair(
        task, matcher_config, seed, cache, coverage_threshold
    )
    try:
        pred = refine(
            score_img, rgb, replace(crf_config, background_energy=background_energy)
        )
    except PartcorrError as exc:
        raise type(exc)(f"{task.pair_id}: {exc}") from exc
    return MetricReport(
        pair_id=task.pair_id,
        support_id=task.support.object_id,
        target_id=task.target.object_id,
        affordance=task.affordance,
        iou=iou(pred, target_gt),
        fwb=weighted_fbeta(pred.bits.astype(np.float64), target_gt),
    )


def run_tasks(
    tasks: list[PairTask],
    matcher_config: MatcherConfig = MatcherConfig(),
    crf_config: CrfConfig = CrfConfig(),
    seed: int = 0,
    workers: int | None = None,
    cache: GridCache | None = None,
    coverage_threshold: float = 0.5,
) -> list[MetricReport]:
    """Run tasks with thread parallelism; reports come back sorted."""
    cache = cache or GridCache()
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(tasks) <= 1:
        reports = [
            run_pair(t, matcher_config, crf_config, seed, cache, coverage_threshold)
            for t in tasks
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(
                pool.map(
                    lambda t: run_pair(
                        t, matcher_config, crf_config, seed, cache, coverage_threshold
                    ),
                    tasks,
                )
            )
    return sorted(reports, key=lambda r: r.pair_id)


# ---------------------------------------------------------------------------
# Ablation over matcher variants
# ---------------------------------------------------------------------------

def sweep_threshold(
    tasks: list[PairTask],
    matcher_config: MatcherConfig,
    crf_config: CrfConfig,
    seed: int = 0,
    cache: GridCache | None = None,
    coverage_threshold: float = 0.5,
) -> float:
    """Best background energy for a variant, chosen by mean IoU on ``tasks``.

    Candidates are 19 evenly spaced values spanning (0, max observed
    score); the first arg-max wins so the sweep is deterministic.
    """
    cache = cache or GridCache()
    prepared = [
        _score_pair(t, matcher_config, seed, cache, coverage_threshold) for t in tasks
    ]
    max_score = max(float(p[0].max()) for p in prepared)
    if max_score <= 0.0:
        return 0.5
    candidates = sweep_grid(max_score)
    mean_ious = []
    for theta in candidates:
        vals = []
        for score_img, _, rgb, gt in prepared:
            pred = refine(score_img, rgb, replace(crf_config, background_energy=theta))
            vals.append(iou(pred, gt))
        mean_ious.append(np.mean(vals))
    return float(candidates[int(np.argmax(mean_ious))])


def run_ablation(
    records: list[ObjectRecord],
    matcher_config: MatcherConfig = MatcherConfig(),
    crf_config: CrfConfig = CrfConfig(),
    mode: str = MODE_INTRA,
    variants: tuple[str, ...] = VARIANTS,
    seed: int = 0,
    workers: int | None = None,
    sweep_stride: int = 5,
    coverage_threshold: float = 0.5,
) -> tuple[list[dict], dict[str, float]]:
    """Evaluate every variant on the same pair list.

    Single-direction variants get their background energy from a
    threshold sweep over every ``sweep_stride``-th task (unless the
    config already overrides it).  Returns per-variant, per-affordance
    mean metric rows plus the thresholds used.
    """
    tasks = enumerate_pairs(records, mode)
    if not tasks:
        return [], {}
    cache = GridCache()
    rows = []
    thresholds: dict[str, float] = {}
    for variant in variants:
        cfg = replace(matcher_config, variant=variant)
        if variant != VARIANT_FULL and cfg.background_energy_override is None:
            sweep_tasks = tasks[::sweep_stride] or tasks[:1]
            theta = sweep_threshold(
                sweep_tasks, cfg, crf_config, seed, cache, coverage_threshold
            )
            cfg = replace(cfg, background_energy_override=theta)
            thresholds[variant] = theta
        else:
            thresholds[variant] = cfg.k_query / (2.0 * cfg.k_target) if (
                variant == VARIANT_FULL
            ) else float(cfg.background_energy_override)
        reports = run_tasks(
            tasks, cfg, crf_config, seed, workers, cache, coverage_threshold
        )
        for affordance, stats in aggregate(reports).items():
            rows.append(
                {
                    "variant": variant,
                    "affordance": affordance,
                    "iou": stats["iou"],
                    "fwb": stats["fwb"],
                    "pairs": stats["pairs"],
                }
            )
    return rows, thresholds


def write_ablation_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variant", "affordance", "iou", "fwb", "pairs"])
        for row in sorted(rows, key=lambda r: (r["variant"], r["affordance"])):
            writer.writerow(
                [
                    row["variant"],
                    row["affordance"],
                    f"{row['iou']:.6f}",
                    f"{row['fwb']:.6f}",
                    row["pairs"],
                ]
            )
