"""Clustered cyclic matching between a query region and a target scene.

Forward direction: each query centroid distributes a unit of probability
over the target centroids (softmax over cosine similarities at a lenient
temperature); summing per target centroid yields its *votes*.  Backward
direction: each target centroid distributes probability over every patch
of the full support grid (sharp temperature); the mass landing inside the
query mask is its *query probability*.  A target centroid's score is the
product of the two, and the score map broadcasts centroid scores to the
patches they represent.

The decision threshold compares scores against a constant background
energy: with the cyclic product this is votes_threshold * prob_threshold
= (k_query / k_target) * 1/2.  Ablation variants keep only one direction
and substitute 1 for the other factor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ConfigError,
    DegenerateDescriptorError,
    DimensionError,
    EmptyRegionError,
)
from .grouping import DEFAULT_K, CentroidSet, cluster
from .io import RESOLUTION_GRID, BinaryMask, DescriptorGrid

VARIANT_FULL = "full"
VARIANT_FORWARD_ONLY = "forward-only"
VARIANT_BACKWARD_ONLY = "backward-only"
VARIANTS = (VARIANT_FULL, VARIANT_FORWARD_ONLY, VARIANT_BACKWARD_ONLY)

DEFAULT_TAU_FORWARD = 0.2
DEFAULT_TAU_BACKWARD = 0.02
SWEEP_STEPS = 19


@dataclass(frozen=True)
class MatcherConfig:
    """Matching temperatures, cluster counts, and variant selection.

    ``background_energy_override`` replaces the sweep-chosen threshold for
    the single-direction variants; the full variant always derives its
    threshold from the cluster counts.
    """

    tau_forward: float = DEFAULT_TAU_FORWARD
    tau_backward: float = DEFAULT_TAU_BACKWARD
    k_query: int = DEFAULT_K
    k_target: int = DEFAULT_K
    variant: str = VARIANT_FULL
    background_energy_override: float | None = None

    def __post_init__(self):
        if self.tau_forward <= 0.0 or self.tau_backward <= 0.0:
            raise ConfigError("softmax temperatures must be positive")
        if self.k_query < 1 or self.k_target < 1:
            raise ConfigError("cluster counts must be >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class MatchResult:
    """All tensors produced while matching one support/target pair.

    ``votes`` and ``query_prob`` are the raw per-target-centroid factors;
    ``scores`` is the fused value actually used downstream (for ablation
    variants the disabled factor is replaced by 1).
    """

    forward_affinity: np.ndarray
    votes: np.ndarray
    backward_affinity: np.ndarray
    query_prob: np.ndarray
    scores: np.ndarray
    score_map: np.ndarray
    tau_forward: float
    tau_backward: float


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between the rows of two matrices."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"descriptor dims differ: {a.shape[1]} vs {b.shape[1]}"
        )
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise DegenerateDescriptorError("zero-norm descriptor in similarity input")
    sim = (a / na[:, None]) @ (b / nb[:, None]).T
    return np.clip(sim, -1.0, 1.0)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max-subtracted before exponentiation)."""
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def forward_match(
    query_set: CentroidSet, target_set: CentroidSet, tau: float = DEFAULT_TAU_FORWARD
) -> tuple[np.ndarray, np.ndarray]:
    """Match query centroids onto target centroids.

    Returns the (k_query, k_target) row-stochastic affinity and the
    per-target-centroid vote totals, which sum to k_query.
    """
    sim = cosine_similarity(query_set.centroids, target_set.centroids)
    affinity = softmax(sim / tau, axis=1)
    votes = affinity.sum(axis=0)
    return affinity, votes


def backward_match(
    target_set: CentroidSet,
    reference: DescriptorGrid,
    query_mask: BinaryMask,
    tau: float = DEFAULT_TAU_BACKWARD,
) -> tuple[np.ndarray, np.ndarray]:
    """Match target centroids back onto every patch of the support grid.

    The affinity row for each target centroid is a distribution over all
    reference patches; ``query_prob`` is the mass falling inside the query
    mask, one value in [0, 1] per target centroid.
    """
    if query_mask.resolution_tag != RESOLUTION_GRID:
        raise DimensionError("backward_match expects a grid-resolution query mask")
    if query_mask.bits.shape != (reference.height_patches, reference.width_patches):
        raise DimensionError(
            f"query mask {query_mask.bits.shape} does not match reference grid "
            f"{(reference.height_patches, reference.width_patches)}"
        )
    if reference.n_patches < 1:
        raise EmptyRegionError("reference grid has no patches")
    if query_mask.is_empty():
        raise EmptyRegionError("query mask selects no reference patches")
    sim = cosine_similarity(target_set.centroids, reference.flat())
    affinity = softmax(sim / tau, axis=1)
    query_prob = affinity[:, query_mask.bits.ravel()].sum(axis=1)
    return affinity, np.clip(query_prob, 0.0, 1.0)


def fuse_scores(
    votes: np.ndarray, query_prob: np.ndarray, target_set: CentroidSet
) -> tuple[np.ndarray, np.ndarray]:
    """Combine votes and query probabilities into per-pixel scores.

    Each masked patch inherits the score of the centroid that represents
    it; patches outside the target mask score 0.
    """
    votes = np.asarray(votes, dtype=np.float64)
    query_prob = np.asarray(query_prob, dtype=np.float64)
    if votes.shape != query_prob.shape or votes.shape[0] != target_set.k:
        raise DimensionError("votes / query_prob length must equal the centroid count")
    scores = votes * query_prob
    score_map = np.zeros(target_set.assignment.shape, dtype=np.float64)
    inside = target_set.assignment >= 0
    score_map[inside] = scores[target_set.assignment[inside]]
    return scores, score_map


def decision_threshold(config: MatcherConfig) -> float:
    """Background energy separating correspondence scores from background.

    Full variant: votes above k_query/k_target and probabilities above 1/2
    mark likely correspondences, so their product k_query/(2 k_target)
    thresholds the fused score.  Single-direction variants use the
    override (normally filled in by a validation sweep) and fall back to
    the corresponding single-branch heuristic when no sweep has run.
    """
    if config.variant == VARIANT_FULL:
        return config.k_query / (2.0 * config.k_target)
    if config.background_energy_override is not None:
        return float(config.background_energy_override)
    if config.variant == VARIANT_FORWARD_ONLY:
        return config.k_query / float(config.k_target)
    return 0.5


def sweep_grid(max_score: float, steps: int = SWEEP_STEPS) -> np.ndarray:
    """Evenly spaced candidate thresholds spanning the open interval (0, max)."""
    if max_score <= 0.0:
        raise ConfigError("sweep needs a positive maximum score")
    return max_score * np.arange(1, steps + 1) / (steps + 1.0)


def _pair_seeds(seed: int) -> tuple[int, int]:
    state = np.random.SeedSequence(seed).generate_state(2)
    return int(state[0]), int(state[1])


def match_pair(
    support: DescriptorGrid,
    query_mask: BinaryMask,
    target: DescriptorGrid,
    target_mask: BinaryMask,
    config: MatcherConfig = MatcherConfig(),
    seed: int = 0,
) -> tuple[MatchResult, float]:
    """Cluster both regions, run both match directions, fuse per variant.

    Returns the match tensors and the background energy consistent with
    the *effective* cluster counts (clusters can shrink when a region has
    fewer distinct descriptors than configured).
    """
    seed_q, seed_t = _pair_seeds(seed)
    query_set = cluster(support, query_mask, k=config.k_query, seed=seed_q)
    target_set = cluster(target, target_mask, k=config.k_target, seed=seed_t)

    forward_affinity, votes = forward_match(query_set, target_set, config.tau_forward)
    backward_affinity, query_prob = backward_match(
        target_set, support, query_mask, config.tau_backward
    )

    if config.variant == VARIANT_FORWARD_ONLY:
        eff_votes, eff_prob = votes, np.ones_like(query_prob)
    elif config.variant == VARIANT_BACKWARD_ONLY:
        eff_votes, eff_prob = np.ones_like(votes), query_prob
    else:
        eff_votes, eff_prob = votes, query_prob
    scores, score_map = fuse_scores(eff_votes, eff_prob, target_set)

    effective = replace(config, k_query=query_set.k, k_target=target_set.k)
    background_energy = decision_threshold(effective)
    result = MatchResult(
        forward_affinity=forward_affinity,
        votes=votes,
        backward_affinity=backward_affinity,
        query_prob=query_prob,
        scores=scores,
        score_map=score_map,
        tau_forward=config.tau_forward,
        tau_backward=config.tau_backward,
    )
    return result, background_energy


def match_variant(
    support: tuple[DescriptorGrid, BinaryMask],
    target: tuple[DescriptorGrid, BinaryMask],
    config: MatcherConfig = MatcherConfig(),
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Convenience wrapper returning (score_map, background_energy)."""
    result, background_energy = match_pair(
        support[0], support[1], target[0], target[1], config=config, seed=seed
    )
    return result.score_map, background_energy
