"""One-shot part correspondence toolkit.

Given a dense descriptor grid of an annotated support image and a
descriptor grid of a target scene, the engine clusters both regions,
enforces cyclic (forward votes x backward probability) matching between
the cluster centroids, fuses the two directions into a per-pixel score
map, and refines it into a binary mask with dense-CRF mean-field
inference.  Around the core sit segmentation metrics, a pairwise
benchmark harness with an ablation sweep, and geometric skill
primitives (grasp pose, containment point, next-object selection).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DegenerateDescriptorError,
    DegenerateGeometryError,
    DimensionError,
    EmptyRegionError,
    FormatError,
    IngestionError,
    PartcorrError,
    UndefinedMetricError,
)
from .io import (
    AFDG_VERSION,
    RESOLUTION_GRID,
    RESOLUTION_IMAGE,
    BinaryMask,
    DepthMap,
    DescriptorGrid,
    downsample_mask,
    read_depth_file,
    read_descriptor_file,
    read_mask_png,
    read_score_pfm,
    saliency_mask,
    upsample_map,
    upsample_mask,
    write_depth_file,
    write_descriptor_file,
    write_mask_png,
    write_score_pfm,
)
from .grouping import CentroidSet, cluster, cluster_inertia, kmeans, kmeans_pp_init
from .matching import (
    VARIANT_BACKWARD_ONLY,
    VARIANT_FORWARD_ONLY,
    VARIANT_FULL,
    VARIANTS,
    MatcherConfig,
    MatchResult,
    backward_match,
    cosine_similarity,
    decision_threshold,
    forward_match,
    fuse_scores,
    match_pair,
    match_variant,
    softmax,
    sweep_grid,
)
from .crf import CrfConfig, mean_field, refine, unaries_from_scores
from .metrics import (
    MetricReport,
    aggregate,
    iou,
    iou_histogram,
    nearest_foreground,
    weighted_fbeta,
    write_aggregate_csv,
    write_histogram_csv,
    write_report_csv,
)
from .skills import (
    Component,
    ComponentSet,
    GraspPose,
    backproject,
    connected_components,
    containment_point,
    grasp_pose,
    select_next,
    skill_records,
)
from .benchmark import (
    GridCache,
    ObjectRecord,
    PairTask,
    enumerate_pairs,
    load_index,
    run_ablation,
    run_pair,
    run_tasks,
    sweep_threshold,
    task_seed,
    write_ablation_csv,
)
from .synthetic import (
    PlantedPair,
    make_planted_pair,
    run_planted_pair,
    write_planted_dataset,
)
